//! Using an external tabular foundation model through the line-protocol
//! bridge. Pass an endpoint (`tcp://host:port` or `stdio:<cmd> ...`) to talk
//! to a real server; without one, a toy server that predicts the context's
//! mean label is started in-process.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

use tabql::env::FeatureRow;
use tabql::regressor::{BridgeClient, RowSet};

fn toy_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut lines = BufReader::new(stream.try_clone().unwrap()).lines();
        let mut out = stream;
        let mut mean = 0.0;
        while let Some(Ok(head)) = lines.next() {
            let fields: Vec<&str> = head.split('\t').collect();
            let reply = match fields[0] {
                "PING" => "PONG\n".to_string(),
                "CTX" => {
                    let n: usize = fields[1].parse().unwrap();
                    let labels: Vec<f64> = (0..n)
                        .map(|_| lines.next().unwrap().unwrap().rsplit('\t').next().unwrap().parse().unwrap())
                        .collect();
                    mean = labels.iter().sum::<f64>() / n as f64;
                    "OK 0\n".to_string()
                }
                "QRY" => {
                    let m: usize = fields[1].parse().unwrap();
                    (0..m).for_each(|_| drop(lines.next()));
                    format!("OK {m}\n{}", format!("{mean}\n").repeat(m))
                }
                "QUIT" => return,
                _ => "ERR BADCMD unknown\n".to_string(),
            };
            out.write_all(reply.as_bytes()).unwrap();
        }
    });
    format!("tcp://{addr}")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let endpoint = std::env::args().nth(1).unwrap_or_else(toy_server);
    let mut client = BridgeClient::new(&endpoint)?;
    client.ping()?;
    println!("connected to {endpoint}");

    let support = RowSet::new(vec![
        FeatureRow::labeled(vec![0.0, 1.0], 1.0),
        FeatureRow::labeled(vec![1.0, 0.0], 3.0),
        FeatureRow::labeled(vec![1.0, 1.0], 5.0),
    ])?;
    let queries = vec![FeatureRow::query(vec![0.5, 0.5]), FeatureRow::query(vec![1.0, 1.0])];
    // the context goes over the wire once; later queries reuse it
    for _ in 0..2 {
        println!("predictions: {:?}", client.predict(&support, &queries)?);
    }
    Ok(())
}
