//! Property tests for the wire formats, the pipeline's fail-open
//! contract, reassembly, and audit soundness.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctgossip_core::challenger::{Challenger, ChallengerConfig, LogDescriptor};
use ctgossip_core::codec::packet::{fragment_ipv4_frame, ipv4_checksum_ok, parse_ipv4, parse_udp};
use ctgossip_core::codec::{
    build_sth_411, build_sth_response_message, decode_sth_txt, encode_sth_txt,
    parse_dns_message, EthernetHeader, Ipv4Header, Ipv6Header, NetHeader, PacketBlueprint,
    Transport,
};
use ctgossip_core::coverage::{coverage, rank_pop, AnnotatedPath, AnnotatedSet, ProbeView, Vantage, VantageFilter};
use ctgossip_core::merkle::{Digest, Log, LogId, LogPolicy, SignedTreeHead, TestSigner, MAIN_BRANCH};
use ctgossip_core::pcap::{PcapReader, PcapWriter};
use ctgossip_core::pipeline::{classify, Pipeline, PipelineConfig, Verdict};
use ctgossip_core::sim::SimOffPathChannel;

fn arbitrary_sth() -> impl Strategy<Value = SignedTreeHead> {
    (
        any::<u64>(),
        any::<u64>(),
        any::<[u8; 32]>(),
        proptest::collection::vec(any::<u8>(), 0..96),
    )
        .prop_map(|(tree_size, timestamp, root, signature)| SignedTreeHead {
            log_id: LogId { id: [7u8; 32], name: "pilot".to_string() },
            tree_size,
            timestamp,
            root_hash: Digest(root),
            signature,
        })
}

proptest! {
    #[test]
    fn sth_txt_round_trip(sth in arbitrary_sth()) {
        let decoded = decode_sth_txt(&encode_sth_txt(&sth)).unwrap();
        prop_assert_eq!(decoded.into_sth(sth.log_id.clone()), sth);
    }

    #[test]
    fn dns_message_round_trip(
        sth in arbitrary_sth(),
        label in "[a-z][a-z0-9]{0,19}",
        txid in any::<u16>(),
    ) {
        // Keep the payload within one TXT character string.
        prop_assume!(encode_sth_txt(&sth).len() <= 255);
        let message = build_sth_response_message(&label, &sth, txid, 4096).unwrap();
        let parsed = parse_dns_message(&message).unwrap();
        prop_assert_eq!(parsed.txid, txid);
        prop_assert_eq!(parsed.log_label, label);
        let decoded = decode_sth_txt(&parsed.txt_payload).unwrap();
        prop_assert_eq!(decoded.into_sth(sth.log_id.clone()), sth);
    }

    #[test]
    fn dns_parser_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..700)) {
        // Any outcome is fine; the property is that there always is one.
        let _ = parse_dns_message(&bytes);
    }

    #[test]
    fn built_headers_agree_with_byte_counts(
        payload in proptest::collection::vec(any::<u8>(), 0..600),
        v6 in any::<bool>(),
        src_port in any::<u16>(),
        dst_port in any::<u16>(),
    ) {
        let blueprint = if v6 {
            PacketBlueprint {
                eth: EthernetHeader::new(0x86DD),
                net: Some(NetHeader::V6(Ipv6Header::udp([1; 16], [2; 16]))),
                transport: Transport::Udp { src_port, dst_port },
                payload,
            }
        } else {
            PacketBlueprint {
                eth: EthernetHeader::new(0x0800),
                net: Some(NetHeader::V4(Ipv4Header::udp([10, 0, 0, 1], [10, 0, 0, 2]))),
                transport: Transport::Udp { src_port, dst_port },
                payload,
            }
        };
        let frame = blueprint.build();
        if v6 {
            let udp = parse_udp(&frame[14 + 40..]).unwrap();
            prop_assert_eq!(usize::from(udp.length), frame.len() - 14 - 40);
        } else {
            let ip = parse_ipv4(&frame[14..]).unwrap();
            prop_assert_eq!(usize::from(ip.total_length), frame.len() - 14);
            prop_assert!(ipv4_checksum_ok(&frame[14..]));
            let udp = parse_udp(&frame[14 + 20..]).unwrap();
            prop_assert_eq!(usize::from(udp.length), frame.len() - 14 - 20);
        }
    }

    #[test]
    fn pcap_round_trip(
        packets in proptest::collection::vec(
            (any::<u32>(), proptest::collection::vec(any::<u8>(), 0..200)),
            0..20,
        )
    ) {
        let mut buf = Vec::new();
        let mut writer = PcapWriter::new(&mut buf).unwrap();
        for (ts, data) in &packets {
            writer.write_packet(u64::from(*ts), data).unwrap();
        }
        let reader = PcapReader::new(buf.as_slice()).unwrap();
        let back: Vec<(u64, Vec<u8>)> = reader
            .map(|p| p.map(|p| (p.timestamp_us, p.data)).unwrap())
            .collect();
        let want: Vec<(u64, Vec<u8>)> =
            packets.into_iter().map(|(ts, data)| (u64::from(ts), data)).collect();
        prop_assert_eq!(back, want);
    }

    #[test]
    fn classify_never_panics_and_never_drops(
        bytes in proptest::collection::vec(any::<u8>(), 0..700)
    ) {
        let config = PipelineConfig::new(["pilot".to_string()]);
        let mut pipeline = Pipeline::new(config.clone(), "prop");
        let (verdict, trace) = classify(&bytes, &config);
        prop_assert!(trace.len() <= 8);
        let result = pipeline.process(&bytes, 0);
        prop_assert_eq!(result.forwarded, &bytes[..]);
        prop_assert_eq!(result.verdict, verdict);
    }
}

#[test]
fn dns_parser_survives_heavy_fuzz() {
    // 100k arbitrary inputs, plus mutated well-formed messages so deeper
    // parse paths get hit; the parser must always return a value.
    let (_, sth) = pilot_fixture(4);
    let good = build_sth_response_message("pilot", &sth, 1, 4096).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD15);
    let mut accepted = 0u64;
    for i in 0..100_000u64 {
        let bytes: Vec<u8> = if i % 2 == 0 {
            (0..rng.gen_range(0..256)).map(|_| rng.gen()).collect()
        } else {
            let mut m = good.clone();
            for _ in 0..rng.gen_range(1..8) {
                let at = rng.gen_range(0..m.len());
                m[at] = rng.gen();
            }
            m
        };
        if parse_dns_message(&bytes).is_ok() {
            accepted += 1;
        }
    }
    // Mutations often survive (payload bytes are opaque); blind noise
    // practically never parses.
    assert!(accepted > 0);
}

fn pilot_fixture(leaves: u64) -> (Log, SignedTreeHead) {
    let mut log = Log::new(
        "pilot",
        LogPolicy { mmd_ms: 1 << 40, sth_frequency: 1 << 20 },
        Box::new(TestSigner::from_label("pilot")),
        0,
    )
    .unwrap();
    for i in 0..leaves {
        log.append(MAIN_BRANCH, &i.to_be_bytes()).unwrap();
    }
    let sth = log.issue_sth(MAIN_BRANCH, 99).unwrap();
    (log, sth)
}

#[test]
fn reassembly_recovers_any_fragmentation_order() {
    let (log, sth) = pilot_fixture(8);
    let frame = build_sth_411("pilot", &sth).unwrap();
    let payload_len = 411 - 14 - 20;

    let mut rng = ChaCha8Rng::seed_from_u64(0xACE);
    for case in 0..200 {
        // Random split into 2..=6 chunks, 8-byte aligned except the tail.
        let pieces = rng.gen_range(2..=6usize);
        let mut cuts: BTreeSet<usize> = BTreeSet::new();
        while cuts.len() < pieces - 1 {
            let cut = rng.gen_range(1..payload_len / 8) * 8;
            cuts.insert(cut);
        }
        let mut sizes = Vec::new();
        let mut last = 0;
        for cut in cuts {
            sizes.push(cut - last);
            last = cut;
        }
        sizes.push(payload_len - last);

        let mut fragments = fragment_ipv4_frame(&frame, &sizes);
        fragments.shuffle(&mut rng);

        let descriptor =
            LogDescriptor { log_id: log.id().clone(), public_key: log.public_key() };
        let mut challenger = Challenger::new(ChallengerConfig::new(vec![descriptor]));
        let mut decoded = None;
        for fragment in &fragments {
            if let Some(sth) = challenger.ingest_clone(fragment, 1) {
                decoded = Some(sth);
            }
        }
        let decoded = decoded.unwrap_or_else(|| panic!("case {case}: no reassembly"));
        assert_eq!(decoded, sth, "case {case}");
    }
}

#[test]
fn honest_audits_stay_silent_over_random_schedules() {
    // Randomized append/issue/observe schedules against an honest log
    // must never produce evidence.
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    for run in 0..1000 {
        let mut log = Log::new(
            "pilot",
            LogPolicy { mmd_ms: 1 << 40, sth_frequency: 1 << 20 },
            Box::new(TestSigner::from_label("pilot")),
            0,
        )
        .unwrap();
        let descriptor =
            LogDescriptor { log_id: log.id().clone(), public_key: log.public_key() };
        let mut challenger = Challenger::new(ChallengerConfig::new(vec![descriptor]));

        let mut now = 1u64;
        for _ in 0..rng.gen_range(1..12) {
            for _ in 0..rng.gen_range(0..5) {
                let leaf: [u8; 4] = rng.gen();
                log.append(MAIN_BRANCH, &leaf).unwrap();
            }
            let sth = log.issue_sth(MAIN_BRANCH, now).unwrap();
            now += 1;
            if rng.gen_bool(0.8) {
                let frame = build_sth_411("pilot", &sth).unwrap();
                challenger.ingest_clone(&frame, now);
            }
            if rng.gen_bool(0.3) {
                let mut channel = SimOffPathChannel::new(&log, "anon");
                let _ = challenger.fetch_off_path(&mut channel, "pilot", now);
            }
        }
        let mut channel = SimOffPathChannel::new(&log, "anon");
        let outcome = challenger.audit(&mut channel, "pilot", now, None);
        assert!(outcome.completed, "run {run}");
        assert!(
            outcome.evidence.is_empty(),
            "run {run}: false positive {:?}",
            outcome.evidence[0].kind
        );
    }
}

#[test]
fn pop_top_one_is_the_best_single_vantage() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    for _ in 0..100 {
        let probes: Vec<ProbeView> = (0..rng.gen_range(1..15u64))
            .map(|id| {
                let vantages: Vec<Vantage> = (0..rng.gen_range(1..5))
                    .map(|_| Vantage::As(rng.gen_range(1..9)))
                    .collect();
                ProbeView {
                    probe_id: id,
                    probe_asn: 0,
                    weight: rng.gen_range(1..60),
                    days: [(0u32, AnnotatedPath { vantages, unmapped_hops: 0 })].into(),
                }
            })
            .collect();
        let set = AnnotatedSet { probes, failed_records: 0, unmapped_hops: 0 };
        let ranking = rank_pop(&set, VantageFilter::All, true);
        if ranking.is_empty() {
            continue;
        }
        let top1 = coverage(&set, &[ranking[0]].into());
        let best_single = (1..9u32)
            .map(|asn| coverage(&set, &[Vantage::As(asn)].into()))
            .fold(0.0f64, f64::max);
        assert!(
            (top1 - best_single).abs() < 1e-12,
            "pop top-1 {top1} vs best single {best_single}"
        );
        // And prefixes only improve on it.
        for k in 1..=ranking.len() {
            let prefix: BTreeSet<Vantage> = ranking[..k].iter().copied().collect();
            assert!(coverage(&set, &prefix) + 1e-12 >= top1);
        }
    }
}

#[test]
fn clone_verdicts_match_classification_on_fixture_mix() {
    // Clone completeness at n = 1: every clone-class verdict yields a
    // clone while the channel has room.
    let (_, sth) = pilot_fixture(4);
    let frames = [
        build_sth_411("pilot", &sth).unwrap(),
        ctgossip_core::codec::build_tiny_fragment_64(),
        ctgossip_core::codec::build_background_udp(64),
    ];
    let config = PipelineConfig::new(["pilot".to_string()]);
    let (mut pipeline, rx) = Pipeline::with_channel(config, "prop");
    let mut expected = 0;
    for (i, frame) in frames.iter().cycle().take(300).enumerate() {
        let result = pipeline.process(frame, i as u64);
        if result.verdict.is_clone() {
            expected += 1;
            assert!(result.cloned);
        }
    }
    assert_eq!(rx.try_iter().count(), expected);
    assert_eq!(expected, 200);
}

#[test]
fn classify_agrees_with_verdict_kind_table() {
    // The fragment rule as one exhaustive three-variable truth table with
    // boundary lengths around the 400-byte threshold.
    let config = PipelineConfig::new(["pilot".to_string()]);
    for mf in [false, true] {
        for offset_units in [0u16, 1, 100] {
            for total in [21u16, 399, 400, 401, 1200] {
                let frame = ctgossip_core::codec::build_fragment_with(mf, offset_units, total);
                let verdict = classify(&frame, &config).0;
                let fragment = mf || offset_units > 0;
                let tiny = fragment && total < 400;
                assert_eq!(verdict == Verdict::CloneFragment, tiny);
            }
        }
    }
}
