use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;

use shower_telemetry::{
    ClientError, Clock, FieldValue, ServerHandle, Store, StoreOptions, TelemetryClient, Visibility,
};

fn loopback() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

fn sim_server() -> ServerHandle {
    let store = Store::in_memory(StoreOptions {
        clock: Clock::Simulated,
        ..Default::default()
    });
    ServerHandle::spawn(Arc::new(store), loopback()).unwrap()
}

#[test]
fn update_and_read_over_http() {
    let server = sim_server();
    let client = TelemetryClient::new(&server.base_url()).unwrap();
    let ch = client
        .create_channel(
            "shower",
            &["distance", "temperature", "humidity"],
            Visibility::Private,
            None,
        )
        .unwrap();
    assert_eq!(ch.channel_id, 1);

    let w = client
        .write_update(
            &ch.write_key,
            &[(1, 8.0.into()), (2, 23.0.into()), (3, 15.0.into())],
            Some(0.0),
        )
        .unwrap();
    assert_eq!((w.entry_id, w.status.as_str()), (1, "200 OK"));
    assert_eq!(
        client
            .write_update(&ch.write_key, &[(1, 74.0.into())], Some(1.0))
            .unwrap()
            .entry_id,
        2
    );
    assert_eq!(
        client
            .write_update(&ch.write_key, &[(1, 99.0.into())], Some(1.5))
            .unwrap()
            .entry_id,
        0
    );

    let feed = client.read_feed(ch.channel_id, &ch.read_key, 10).unwrap();
    assert_eq!(feed.len(), 2);
    assert_eq!(feed[0].values[&2], FieldValue::Number(23.0));
    assert_eq!(feed[1].values[&1], FieldValue::Number(74.0));
    assert_eq!(
        client
            .read_last_field(ch.channel_id, &ch.read_key, 1)
            .unwrap()
            .as_deref(),
        Some("74")
    );
    assert_eq!(
        client
            .read_last_field(ch.channel_id, &ch.read_key, 3)
            .unwrap()
            .as_deref(),
        Some("15")
    );

    assert!(matches!(
        client.read_feed(ch.channel_id, "WRONGKEY", 1),
        Err(ClientError::Unauthorized)
    ));
    assert!(matches!(
        client.write_update("WRONGKEY", &[(1, 1.0.into())], Some(9.0)),
        Err(ClientError::Unauthorized)
    ));
    assert!(matches!(
        client.read_feed(42, &ch.read_key, 1),
        Err(ClientError::NotFound)
    ));
    let nine: Vec<String> = (1..=9).map(|i| format!("f{i}")).collect();
    let nine: Vec<&str> = nine.iter().map(String::as_str).collect();
    assert!(matches!(
        client.create_channel("x", &nine, Visibility::Private, None),
        Err(ClientError::Status { status, .. }) if status.as_u16() == 400
    ));
    server.shutdown();
}

#[test]
fn raw_protocol_shapes() {
    let server = sim_server();
    let base = server.base_url();
    let http = reqwest::blocking::Client::new();
    let created: serde_json::Value = serde_json::from_str(
        &http
            .post(format!(
                "{base}/channels?name=bench&field=distance&field=temperature&visibility=private"
            ))
            .send()
            .unwrap()
            .text()
            .unwrap(),
    )
    .unwrap();
    let write_key = created["write_key"].as_str().unwrap();
    let read_key = created["read_key"].as_str().unwrap();

    // GET with query parameters works as well as a form POST
    let r = http
        .get(format!(
            "{base}/update?api_key={write_key}&field1=8&created_at=0"
        ))
        .send()
        .unwrap();
    assert_eq!(r.status().as_u16(), 200);
    assert_eq!(r.text().unwrap(), "1");
    let r = http
        .get(format!("{base}/update?api_key=NOPE&field1=8&created_at=5"))
        .send()
        .unwrap();
    assert_eq!(r.status().as_u16(), 401);
    assert_eq!(r.text().unwrap(), "invalid key");

    let r = http
        .get(format!(
            "{base}/channels/1/fields/2/last.txt?api_key={read_key}"
        ))
        .send()
        .unwrap();
    assert_eq!(r.status().as_u16(), 404);

    let doc: serde_json::Value = serde_json::from_str(
        &http
            .get(format!("{base}/channels/1/feeds.json?api_key={read_key}"))
            .send()
            .unwrap()
            .text()
            .unwrap(),
    )
    .unwrap();
    assert_eq!(doc["channel"]["id"], 1);
    assert_eq!(doc["channel"]["name"], "bench");
    assert_eq!(doc["channel"]["field1"], "distance");
    assert_eq!(doc["channel"]["field2"], "temperature");
    assert_eq!(doc["feeds"][0]["entry_id"], 1);
    assert_eq!(doc["feeds"][0]["field1"], 8.0);
    assert_eq!(doc["feeds"][0]["created_at"], 0.0);
}

struct Served {
    child: Child,
    base: String,
}

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn serve(data_dir: &std::path::Path) -> Served {
    let mut child = Command::new(env!("CARGO_BIN_EXE_telemetry-serve"))
        .args(["--port", "0", "--sim-time", "--data-dir"])
        .arg(data_dir)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let base = line
        .trim()
        .strip_prefix("listening on ")
        .expect("startup line")
        .to_string();
    Served { child, base }
}

#[test]
fn binary_survives_kill_and_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (ch, before) = {
        let served = serve(dir.path());
        let client = TelemetryClient::new(&served.base).unwrap();
        let ch = client
            .create_channel("s", &["d", "t"], Visibility::Private, None)
            .unwrap();
        for i in 0..20 {
            let id = client
                .write_update(
                    &ch.write_key,
                    &[(1, f64::from(i).into()), (2, "txt".into())],
                    Some(f64::from(i)),
                )
                .unwrap()
                .entry_id;
            assert_eq!(id, u64::try_from(i).unwrap() + 1);
        }
        let before = client.read_feed(ch.channel_id, &ch.read_key, 100).unwrap();
        (ch, before)
        // dropping `served` sends SIGKILL
    };
    let served = serve(dir.path());
    let client = TelemetryClient::new(&served.base).unwrap();
    assert_eq!(
        client.read_feed(ch.channel_id, &ch.read_key, 100).unwrap(),
        before
    );
    assert_eq!(
        client
            .write_update(&ch.write_key, &[(1, 0.0.into())], Some(19.5))
            .unwrap()
            .entry_id,
        0
    );
    assert_eq!(
        client
            .write_update(&ch.write_key, &[(1, 0.0.into())], Some(20.0))
            .unwrap()
            .entry_id,
        21
    );
}
