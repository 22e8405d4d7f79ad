mod common;

use std::io::Write;
use std::sync::{Arc, Mutex};

use axum::http::StatusCode;
use codewe_cli::app;
use common::*;

#[derive(Clone, Default)]
struct Capture(Arc<Mutex<Vec<u8>>>);

impl Write for Capture {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[tokio::test]
async fn logs_never_carry_response_content() {
    let capture = Capture::default();
    let writer = capture.clone();
    tracing_subscriber::fmt()
        .with_max_level(tracing::Level::TRACE)
        .with_ansi(false)
        .with_writer(move || writer.clone())
        .init();

    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path(), 4, 0);
    let uri = format!("/surveys/{}/responses", f.survey);
    let mut sent = Vec::new();
    for i in 0..3u8 {
        let (req, _) = submission(&f, i + 1, i as usize);
        assert_eq!(call(&f.app, "POST", &uri, Some(serde_json::to_string(&req).unwrap())).await.0, StatusCode::OK);
        sent.push(req);
    }
    let (replay, _) = submission(&f, 9, 0);
    assert_eq!(call(&f.app, "POST", &uri, Some(serde_json::to_string(&replay).unwrap())).await.0, StatusCode::CONFLICT);
    sent.push(replay);
    f.state.node.close_survey(&f.survey, &f.admin).unwrap();
    app::analyze(&f.state.node, &f.state.reports, &f.survey, &f.admin).unwrap();
    assert_eq!(call(&f.app, "GET", &format!("/surveys/{}/audit", f.survey), None).await.0, StatusCode::OK);

    let logs = String::from_utf8(capture.0.lock().unwrap().clone()).unwrap();
    assert!(logs.contains("response accepted"), "service logged nothing: {logs}");
    assert!(logs.contains("TokenReplay"));
    for req in &sent {
        let response: serde_json::Value = serde_json::from_str(&req.response).unwrap();
        let mut secrets = vec![
            req.response.clone(),
            req.public_key.to_hex(),
            req.token.to_hex(),
            req.signature.to_hex(),
            response["client_nonce"].as_str().unwrap().to_string(),
            response["answers"].to_string(),
        ];
        secrets.retain(|s| !s.is_empty());
        for s in secrets {
            assert!(!logs.contains(&s), "log leaks {s}");
        }
    }
}
