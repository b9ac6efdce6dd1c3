//! `ctgossip logserve`: answer `sth.<log>` TXT queries over UDP from an
//! imported log state, one STH per response packet. With class mappings
//! and a forking state file, different source addresses get different
//! views.

use std::collections::BTreeMap;
use std::net::{IpAddr, SocketAddr, UdpSocket};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ctgossip_core::codec::dns::{build_error_response, parse_question, ParseBounds};
use ctgossip_core::codec::{build_sth_response_message, DEFAULT_RESPONSE_THRESHOLD, TYPE_TXT};
use ctgossip_core::merkle::Log;

#[derive(clap::Args)]
pub struct Args {
    /// Exported log state file (includes the signing key).
    #[arg(long)]
    state: PathBuf,
    /// Bind address; port 0 picks one (printed on stderr).
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: SocketAddr,
    /// Source-address-to-class mapping, e.g. `127.0.0.2=victim`
    /// (repeatable). Unmapped sources use the default class.
    #[arg(long = "class")]
    classes: Vec<String>,
    /// Class label for unmapped source addresses.
    #[arg(long, default_value = "default")]
    default_class: String,
    /// Maximum DNS response size in bytes.
    #[arg(long, default_value_t = DEFAULT_RESPONSE_THRESHOLD)]
    threshold: usize,
    /// Stop after answering this many datagrams (0 = run forever).
    #[arg(long, default_value_t = 0)]
    max_queries: u64,
}

pub fn run(args: Args) -> Result<()> {
    let reader = std::io::BufReader::new(
        std::fs::File::open(&args.state)
            .with_context(|| format!("opening {}", args.state.display()))?,
    );
    let log = Log::import(reader)
        .with_context(|| format!("importing {}", args.state.display()))?;

    let mut classes: BTreeMap<IpAddr, String> = BTreeMap::new();
    for entry in &args.classes {
        let Some((ip, class)) = entry.split_once('=') else {
            bail!("--class wants IP=LABEL, got {entry:?}");
        };
        classes.insert(ip.parse().context("parsing class IP")?, class.to_string());
    }

    let socket = UdpSocket::bind(args.listen)
        .with_context(|| format!("binding {}", args.listen))?;
    eprintln!("listening on {} (log {:?})", socket.local_addr()?, log.name());

    let bounds = ParseBounds::default();
    let mut buf = [0u8; 2048];
    let mut handled = 0u64;
    loop {
        if args.max_queries > 0 && handled >= args.max_queries {
            break;
        }
        let (len, peer) = socket.recv_from(&mut buf)?;
        handled += 1;
        let datagram = &buf[..len];
        let mut visits = Vec::new();
        let question = match parse_question(datagram, &bounds, &mut visits, None) {
            Ok(q) if q.qd_count >= 1 => q,
            _ => {
                if datagram.len() >= 2 {
                    let txid = u16::from_be_bytes([datagram[0], datagram[1]]);
                    let _ = socket.send_to(&build_error_response(txid, &[], 1), peer);
                }
                continue;
            }
        };
        let question_section = &datagram[12..question.end_offset.min(len)];

        let servable = question
            .sth_log_label()
            .filter(|label| *label == log.name())
            .is_some()
            && question.qtype == TYPE_TXT;
        if !servable {
            let _ = socket.send_to(
                &build_error_response(question.txid, question_section, 3),
                peer,
            );
            continue;
        }

        let class = classes
            .get(&peer.ip())
            .map_or(args.default_class.as_str(), |c| c.as_str());
        let sth = log.serve_sth(class);
        match build_sth_response_message(log.name(), &sth, question.txid, args.threshold) {
            Ok(response) => {
                let _ = socket.send_to(&response, peer);
            }
            Err(_) => {
                let _ = socket.send_to(
                    &build_error_response(question.txid, question_section, 2),
                    peer,
                );
            }
        }
    }
    eprintln!("handled {handled} datagrams");
    Ok(())
}
