//! End-to-end client/server behavior over real TCP connections.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::{Arc, Barrier};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simorch_linalg::Matrix;
use simorch_mlp::{serialize, Activation, MlpModel};
use simorch_store::protocol::{encode_command, write_frame, Command};
use simorch_store::server::{spawn, ServerConfig, ServerHandle};
use simorch_store::{
    ClientError, Dataset, Kind, Polled, PollSpec, Store, StoreClient, Tensor,
};

fn start_server() -> ServerHandle {
    spawn(
        Arc::new(Store::new()),
        "127.0.0.1:0",
        ServerConfig::default(),
    )
    .expect("bind server")
}

fn client(h: &ServerHandle) -> StoreClient {
    StoreClient::connect(&h.addr_string()).expect("connect")
}

#[test]
fn ping_and_missing_key() {
    let server = start_server();
    let mut c = client(&server);
    c.ping().unwrap();
    assert!(c.get_tensor("missing").unwrap().is_none());
    assert!(!c.exists(Kind::Tensor, "missing").unwrap());
}

#[test]
fn tensor_round_trip_is_bitwise_for_random_shapes() {
    let server = start_server();
    let mut c = client(&server);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..20 {
        let ndim = rng.gen_range(1..=4);
        let dims: Vec<usize> = (0..ndim).map(|_| rng.gen_range(1..=12)).collect();
        let len: usize = dims.iter().product();
        // Mix ordinary values with exact-bit hazards.
        let data: Vec<f64> = (0..len)
            .map(|i| match i % 7 {
                0 => -0.0,
                1 => f64::MIN_POSITIVE,
                2 => 1.0 / 3.0,
                _ => rng.gen_range(-1e12..1e12),
            })
            .collect();
        let t = Tensor::new(dims, data).unwrap();
        let key = format!("t{case}");
        c.put_tensor(&key, &t).unwrap();
        let back = c.get_tensor(&key).unwrap().unwrap();
        assert_eq!(back.dims(), t.dims());
        let same_bits = back
            .data()
            .iter()
            .zip(t.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same_bits, "case {case} lost bits");
    }
    // One large tensor near the randomized-property size bound.
    let big = Tensor::new(vec![100, 1000], (0..100_000).map(|i| i as f64 * 0.5).collect()).unwrap();
    c.put_tensor("big", &big).unwrap();
    assert_eq!(c.get_tensor("big").unwrap().unwrap(), big);
}

#[test]
fn dataset_round_trip_and_overwrite() {
    let server = start_server();
    let mut c = client(&server);
    let mut ds = Dataset::new("d");
    ds.put_tensor("f1", Tensor::scalar(1.5));
    ds.add_meta_string("note", "one");
    ds.add_meta_string("note", "two");
    c.put_dataset(&ds).unwrap();
    assert_eq!(c.get_dataset("d").unwrap().unwrap(), ds);

    let mut ds2 = Dataset::new("d");
    ds2.put_tensor("f2", Tensor::scalar(2.5));
    c.put_dataset(&ds2).unwrap();
    assert_eq!(c.get_dataset("d").unwrap().unwrap(), ds2);
}

#[test]
fn cross_client_visibility_after_ack() {
    let server = start_server();
    let addr = server.addr_string();
    let barrier = Arc::new(Barrier::new(2));

    let writer_barrier = Arc::clone(&barrier);
    let writer_addr = addr.clone();
    let writer = std::thread::spawn(move || {
        let mut a = StoreClient::connect(&writer_addr).unwrap();
        a.put_tensor("shared", &Tensor::scalar(7.0)).unwrap();
        // The put is acknowledged before the barrier, so the reader must see it.
        writer_barrier.wait();
    });

    let mut b = client(&server);
    barrier.wait();
    assert!(b.exists(Kind::Tensor, "shared").unwrap());
    assert_eq!(b.get_tensor("shared").unwrap().unwrap().data(), &[7.0]);
    writer.join().unwrap();
}

#[test]
fn responses_arrive_in_request_order() {
    // Write several frames back-to-back on a raw socket, then read the
    // responses; they must come back strictly in order.
    let server = start_server();
    let mut raw = TcpStream::connect(server.addr()).unwrap();
    let keys = ["a", "b", "c", "d"];
    for key in keys {
        let put = encode_command(&Command::PutTensor {
            key: key.into(),
            tensor: Tensor::scalar(1.0),
        })
        .unwrap();
        write_frame(&mut raw, &put).unwrap();
    }
    for key in keys {
        let get = encode_command(&Command::Exists {
            kind: Kind::Tensor,
            key: key.into(),
        })
        .unwrap();
        write_frame(&mut raw, &get).unwrap();
    }
    let mut statuses = Vec::new();
    for _ in 0..8 {
        let mut len = [0u8; 4];
        raw.read_exact(&mut len).unwrap();
        let mut body = vec![0u8; u32::from_be_bytes(len) as usize];
        raw.read_exact(&mut body).unwrap();
        statuses.push(body);
    }
    for s in &statuses[..4] {
        assert_eq!(s.as_slice(), &[0u8][..]); // OK, empty body
    }
    for s in &statuses[4..] {
        assert_eq!(s.as_slice(), &[0u8, 1u8][..]); // OK, exists=true
    }
}

#[test]
fn concurrent_list_appends_are_exact() {
    let server = start_server();
    let addr = server.addr_string();
    {
        let mut setup = client(&server);
        for r in 0..4 {
            let mut ds = Dataset::new(format!("ds{r}"));
            ds.put_tensor("x", Tensor::scalar(r as f64));
            setup.put_dataset(&ds).unwrap();
        }
    }
    let barrier = Arc::new(Barrier::new(4));
    let mut handles = Vec::new();
    for r in 0..4 {
        let addr = addr.clone();
        let barrier = Arc::clone(&barrier);
        handles.push(std::thread::spawn(move || {
            let mut c = StoreClient::connect(&addr).unwrap();
            barrier.wait();
            for _ in 0..100 {
                c.list_append("L", &format!("ds{r}")).unwrap();
            }
        }));
    }
    for h in handles {
        h.join().unwrap();
    }
    let mut c = client(&server);
    assert_eq!(c.list_length("L").unwrap(), Some(400));
    let entries = c.list_get("L").unwrap().unwrap();
    assert_eq!(entries.len(), 400);
    for r in 0..4 {
        let key = format!("ds{r}");
        assert_eq!(entries.iter().filter(|e| **e == key).count(), 100);
    }
}

#[test]
fn dangling_append_is_an_error() {
    let server = start_server();
    let mut c = client(&server);
    match c.list_append("L", "nodataset") {
        Err(ClientError::Server(reason)) => assert!(reason.contains("dangling")),
        other => panic!("expected dangling error, got {other:?}"),
    }
}

#[test]
fn poll_key_counts_queries_exactly() {
    let server = start_server();
    let mut c = client(&server);
    c.put_tensor("present", &Tensor::flag()).unwrap();

    let spec = PollSpec::millis(10, 1000).unwrap();
    let before = c.requests_sent();
    let polled = c.poll_key(Kind::Tensor, "present", &spec).unwrap();
    assert_eq!(polled, Polled::Found { attempts: 1 });
    assert_eq!(c.requests_sent() - before, 1);

    let spec = PollSpec::millis(1, 7).unwrap();
    let before = c.requests_sent();
    let polled = c.poll_key(Kind::Tensor, "never", &spec).unwrap();
    assert_eq!(polled, Polled::Timeout { attempts: 7 });
    assert_eq!(c.requests_sent() - before, 7);
}

#[test]
fn poll_key_sees_midpoll_writer() {
    let server = start_server();
    let addr = server.addr_string();
    let writer = std::thread::spawn(move || {
        let mut w = StoreClient::connect(&addr).unwrap();
        // Land after roughly five poll intervals.
        std::thread::sleep(Duration::from_millis(50));
        w.put_tensor("late", &Tensor::flag()).unwrap();
    });
    let mut c = client(&server);
    let spec = PollSpec::millis(10, 1000).unwrap();
    let polled = c.poll_key(Kind::Tensor, "late", &spec).unwrap();
    assert!(polled.found(), "writer landed within the poll budget");
    assert!(polled.attempts() > 1, "the first attempt precedes the write");
    writer.join().unwrap();
}

#[test]
fn poll_list_length_variants() {
    let server = start_server();
    let mut c = client(&server);
    for r in 0..5 {
        c.put_dataset(&Dataset::new(format!("d{r}"))).unwrap();
    }
    for r in 0..4 {
        c.list_append("L", &format!("d{r}")).unwrap();
    }
    let spec = PollSpec::millis(1, 5).unwrap();
    assert!(c.poll_list_length("L", 4, &spec).unwrap().found());

    // Only 3 of 4 expected entries ever arrive.
    for r in 0..3 {
        c.list_append("L3", &format!("d{r}")).unwrap();
    }
    assert!(matches!(
        c.poll_list_length("L3", 4, &spec).unwrap(),
        Polled::Timeout { .. }
    ));

    // A fifth append means a missed deletion; polling for 4 must fail fast.
    c.list_append("L", "d4").unwrap();
    match c.poll_list_length("L", 4, &spec) {
        Err(ClientError::Overshoot { expected, actual }) => {
            assert_eq!((expected, actual), (4, 5));
        }
        other => panic!("expected overshoot, got {other:?}"),
    }
}

#[test]
fn run_model_matches_local_forward_bitwise() {
    let server = start_server();
    let mut c = client(&server);
    let model = MlpModel::random(&[3, 5, 5, 2], Activation::Tanh, 77).unwrap();
    c.put_model("m", &serialize(&model)).unwrap();
    assert!(c.model_exists("m").unwrap());

    let x = Matrix::from_fn(9, 3, |i, j| ((i * 3 + j) as f64).sin());
    let input = Tensor::from_matrix(&x);
    c.put_tensor("in", &input).unwrap();
    c.run_model("m", &["in"], &["out"]).unwrap();

    let local = model.forward(&x).unwrap();
    let remote = c.get_tensor("out").unwrap().unwrap();
    assert_eq!(remote.dims(), &[9, 2]);
    let same_bits = remote
        .data()
        .iter()
        .zip(local.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    assert!(same_bits, "store-side inference drifted from local forward");

    // Deleting the model turns further runs into NotFound re-poll signals.
    c.delete(Kind::Model, "m").unwrap();
    assert!(matches!(
        c.run_model("m", &["in"], &["out2"]),
        Err(ClientError::NotFound)
    ));
}

#[test]
fn malformed_bodies_keep_the_connection_open() {
    let server = start_server();
    let mut raw = TcpStream::connect(server.addr()).unwrap();

    // Truncated PUT_TENSOR payload.
    let full = encode_command(&Command::PutTensor {
        key: "k".into(),
        tensor: Tensor::new(vec![4], vec![1.0; 4]).unwrap(),
    })
    .unwrap();
    write_frame(&mut raw, &full[..full.len() - 5]).unwrap();
    let mut len = [0u8; 4];
    raw.read_exact(&mut len).unwrap();
    let mut body = vec![0u8; u32::from_be_bytes(len) as usize];
    raw.read_exact(&mut body).unwrap();
    assert_eq!(body[0], 2);
    assert_eq!(&body[1..], b"short tensor body");

    // Unknown command byte.
    write_frame(&mut raw, &[250u8]).unwrap();
    raw.read_exact(&mut len).unwrap();
    let mut body = vec![0u8; u32::from_be_bytes(len) as usize];
    raw.read_exact(&mut body).unwrap();
    assert_eq!(body[0], 2);

    // The same connection still answers a healthy request.
    write_frame(&mut raw, &encode_command(&Command::Ping).unwrap()).unwrap();
    raw.read_exact(&mut len).unwrap();
    let mut body = vec![0u8; u32::from_be_bytes(len) as usize];
    raw.read_exact(&mut body).unwrap();
    assert_eq!(body, vec![0]);
}

#[test]
fn oversize_frame_closes_the_connection() {
    let server = spawn(
        Arc::new(Store::new()),
        "127.0.0.1:0",
        ServerConfig {
            max_frame_bytes: 1024,
        },
    )
    .unwrap();
    let mut raw = TcpStream::connect(server.addr()).unwrap();
    raw.write_all(&(4096u32).to_be_bytes()).unwrap();
    raw.write_all(&[0u8; 16]).unwrap();
    // The server drops the connection without a response.
    let mut buf = [0u8; 1];
    raw.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    assert_eq!(raw.read(&mut buf).unwrap(), 0, "expected EOF");
}

#[test]
fn shutdown_acks_then_refuses_new_connections() {
    let server = start_server();
    let addr = server.addr_string();
    let mut c = StoreClient::connect(&addr).unwrap();
    c.shutdown_server().unwrap();

    // The accept loop winds down; new connections soon fail or go unanswered.
    let deadline = std::time::Instant::now() + Duration::from_secs(5);
    loop {
        match StoreClient::connect(&addr) {
            Err(_) => break,
            Ok(mut probe) => {
                if probe.ping().is_err() {
                    break;
                }
            }
        }
        assert!(
            std::time::Instant::now() < deadline,
            "server kept accepting after shutdown"
        );
        std::thread::sleep(Duration::from_millis(10));
    }
}

#[test]
fn data_source_prefix_scopes_all_keys() {
    let server = start_server();
    let mut member = client(&server);
    member.set_data_source(Some("member0"));
    member.put_tensor("x", &Tensor::scalar(3.0)).unwrap();

    let mut plain = client(&server);
    assert!(plain.get_tensor("x").unwrap().is_none());
    assert_eq!(
        plain.get_tensor("member0.x").unwrap().unwrap().data(),
        &[3.0]
    );
}
