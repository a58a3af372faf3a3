//! Command-line front end and simulation harness.
