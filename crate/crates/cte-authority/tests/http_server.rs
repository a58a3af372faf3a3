//! The authority served over real sockets: routing, payload handling,
//! outage signaling, and size limits.

use std::sync::Arc;

use cte_authority::{Authority, AuthorityConfig, AuthorityServer};
use cte_core::codes::code;
use cte_core::{
    decode_response, encode_request, pack, serialize_batch, sign, CTeDocument, Certificate, Clock,
    Cnpj, Modal, ReceiptBody, RequestContext, ServiceKind, Timestamp, TrackBatchRequest, Uf,
    VirtualClock, PROTOCOL_VERSION,
};

fn post(url: &str, bytes: &[u8]) -> Result<(u16, Vec<u8>), ureq::Error> {
    let mut response = ureq::post(url)
        .content_type("application/xml")
        .send(bytes)?;
    let body = response.body_mut().read_to_vec()?;
    Ok((response.status().as_u16(), body))
}

#[test]
fn serves_batch_lifecycle_over_http() {
    let clock = Arc::new(VirtualClock::new(Timestamp::from_ms(1_750_000_000_000)));
    let authority = Arc::new(Authority::new(AuthorityConfig::default()));
    let cnpj = Cnpj::complete("112223330001").unwrap();
    let cert = Certificate::new(
        cnpj.clone(),
        Timestamp::from_ms(0),
        Timestamp::from_ms(u64::MAX / 2),
        b"key-http".to_vec(),
        b"secret-http".to_vec(),
    )
    .unwrap();
    authority.register_certificate(cert.clone());

    let server =
        AuthorityServer::start(Arc::clone(&authority), clock.clone(), "127.0.0.1:0", 2).unwrap();
    let addr = server.local_addr().unwrap();
    let base = format!("http://{addr}");

    let mut doc = CTeDocument::new(
        cnpj.clone(),
        "001",
        "000000001",
        clock.now(),
        Modal::Highway,
        Uf::new(35).unwrap(),
        Uf::new(43).unwrap(),
        120_000,
        "steel coils",
        "00000001",
    )
    .unwrap();
    doc.signature = Some(sign(&doc, &cert, clock.now()).unwrap());
    let batch = serialize_batch(&pack(vec![doc], 1).unwrap().batches[0]);
    let ctx = RequestContext {
        version: PROTOCOL_VERSION.to_string(),
        uf: Uf::new(35).unwrap(),
        cert_ref: cert.key_id_hex(),
    };
    let request = encode_request(ServiceKind::SendBatch, &batch, &ctx).unwrap();

    let (status, body) = post(&format!("{base}{}", ServiceKind::SendBatch.path()), &request).unwrap();
    assert_eq!(status, 200);
    let decoded = decode_response(&body);
    assert_eq!(decoded.code.code, code::BATCH_RECEIVED);
    let receipt = ReceiptBody::parse(&decoded.body).unwrap();

    clock.advance_ms(2_000);
    assert_eq!(authority.process_all(clock.now()), 1);

    let track = TrackBatchRequest {
        receipt: receipt.number.as_str().to_string(),
    }
    .encode();
    let request = encode_request(ServiceKind::TrackBatch, &track, &ctx).unwrap();
    let (status, body) = post(&format!("{base}{}", ServiceKind::TrackBatch.path()), &request).unwrap();
    assert_eq!(status, 200);
    let decoded = decode_response(&body);
    assert_eq!(decoded.code.code, code::BATCH_PROCESSED);

    // Unknown endpoints 404; outage turns everything into 503 until lifted.
    match post(&format!("{base}/ws/nonsense"), &request) {
        Err(ureq::Error::StatusCode(404)) => {}
        other => panic!("expected 404, got {other:?}"),
    }
    server.set_down(true);
    match post(&format!("{base}{}", ServiceKind::TrackBatch.path()), &request) {
        Err(ureq::Error::StatusCode(503)) => {}
        other => panic!("expected 503, got {other:?}"),
    }
    server.set_down(false);
    let (status, _) = post(&format!("{base}{}", ServiceKind::TrackBatch.path()), &request).unwrap();
    assert_eq!(status, 200);

    // Oversized request bodies never reach the authority.
    let huge = vec![b'x'; 1_048_577];
    match post(&format!("{base}{}", ServiceKind::TrackBatch.path()), &huge) {
        Err(ureq::Error::StatusCode(413)) => {}
        other => panic!("expected 413, got {other:?}"),
    }

    server.shutdown();
}
