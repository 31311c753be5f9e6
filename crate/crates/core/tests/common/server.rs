//! A minimal HTTP/1.1 server speaking the prediction protocol, backed by
//! the all-neutral reference model.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use permacc::model::{make_model_a, NliModel, PairInput};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, Default)]
pub struct Faults {
    /// Answer this many `/predict` calls with a 503 first.
    pub unavailable: usize,
    /// Leave the last prediction out of every response.
    pub drop_last: bool,
    /// Return predictions in reverse order.
    pub reverse: bool,
}

pub struct TestServer {
    pub url: String,
    pub predict_calls: Arc<AtomicUsize>,
}

pub fn spawn(faults: Faults) -> TestServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&calls);
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let counter = Arc::clone(&counter);
            thread::spawn(move || {
                let _ = handle(stream, faults, &counter);
            });
        }
    });
    TestServer {
        url,
        predict_calls: calls,
    }
}

fn handle(stream: TcpStream, faults: Faults, calls: &AtomicUsize) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut stream = stream;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line)? == 0 {
            return Ok(());
        }
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line)?;
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body)?;

        let (status, reply) = route(&request_line, &body, faults, calls);
        let text = reply.to_string();
        write!(
            stream,
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{text}",
            text.len()
        )?;
        stream.flush()?;
    }
}

fn route(request_line: &str, body: &[u8], faults: Faults, calls: &AtomicUsize) -> (&'static str, Value) {
    let mut parts = request_line.split_whitespace();
    match (parts.next(), parts.next()) {
        (Some("GET"), Some("/health")) => ("200 OK", json!({"status": "ok", "model_id": "test-server"})),
        (Some("POST"), Some("/predict")) => {
            let n = calls.fetch_add(1, Ordering::SeqCst);
            if n < faults.unavailable {
                return ("503 Service Unavailable", json!({"error": "warming up"}));
            }
            let req: Value = serde_json::from_slice(body).unwrap();
            let pairs: Vec<PairInput> = serde_json::from_value(req["pairs"].clone()).unwrap();
            let mut preds = make_model_a().predict_batch(&pairs).unwrap();
            if faults.drop_last {
                preds.pop();
            }
            if faults.reverse {
                preds.reverse();
            }
            ("200 OK", json!({ "predictions": preds }))
        }
        _ => ("404 Not Found", json!({"error": "no route"})),
    }
}
