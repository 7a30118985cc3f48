use std::path::PathBuf;

use i2vc::container::{Container, ContainerHeader, HEADER_LEN};
use i2vc::entropy::Bitpayload;
use i2vc::gop::{
    fuse_references, occlusion_estimate, schedule, sequence_schedule, Codec, CodecSettings, FeatureBuffer, FrameType,
    GopConfig, GopMode, OcclusionMode, OcclusionNet, StartPolicy,
};
use i2vc::harness::{synth_sequence, SequenceKind};
use i2vc::{Error, LatentFeature};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn small_settings() -> CodecSettings {
    CodecSettings {
        steps: 10,
        inv_steps: 5,
        ..CodecSettings::default()
    }
}

fn gop_config() -> impl Strategy<Value = GopConfig> {
    (0usize..4, 1usize..=80, 1usize..=40, 2usize..=40).prop_map(|(m, n, p, i)| GopConfig {
        mode: GopMode::ALL[m],
        gop_size: n,
        p_count: p,
        i_count: i,
    })
}

proptest! {
    #[test]
    fn schedules_are_valid_or_rejected(g in gop_config()) {
        let feasible = match g.mode {
            GopMode::LowDelayB => g.p_count < g.gop_size,
            GopMode::RandomAccess => g.i_count <= g.gop_size,
            _ => true,
        };
        match schedule(&g) {
            Ok(s) => {
                prop_assert!(feasible);
                prop_assert!(s.validate().is_ok());
                prop_assert_eq!(s.len(), g.gop_size);
                let mut seen = vec![false; g.gop_size];
                for e in s.entries() {
                    seen[e.display_index] = true;
                }
                prop_assert!(seen.iter().all(|&v| v));
            }
            Err(_) => prop_assert!(!feasible),
        }
    }

    #[test]
    fn sequences_cover_every_frame_once(g in gop_config(), frames in 1usize..200) {
        prop_assume!(g.validate().is_ok());
        let gops = sequence_schedule(&g, frames).unwrap();
        let mut seen = vec![0; frames];
        for s in &gops {
            prop_assert!(s.validate().is_ok());
            for e in s.entries() {
                seen[e.display_index] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn fusion_is_convex(
        prev in prop::collection::vec(-1e3f64..1e3, 2 * 3 * 4),
        next in prop::collection::vec(-1e3f64..1e3, 2 * 3 * 4),
        seed in any::<u64>(),
        m in 0usize..3,
    ) {
        let p = LatentFeature::from_vec(2, 3, 4, prev).unwrap();
        let n = LatentFeature::from_vec(2, 3, 4, next).unwrap();
        let net = OcclusionNet::new(2, seed).with_mode(OcclusionMode::ALL[m]);
        let o = occlusion_estimate(&p, &n, &net).unwrap();
        prop_assert!(o.feature().data().iter().all(|v| (0.0..=1.0).contains(v)));
        let f = fuse_references(&p, &n, &o).unwrap();
        for ((v, a), b) in f.data().iter().zip(p.data()).zip(n.data()) {
            prop_assert!(a.min(*b) <= *v && *v <= a.max(*b));
        }
    }

    #[test]
    fn container_header_round_trips(
        g in gop_config(),
        lambda_q in 128u16..=8192,
        hw in (1u16..=1000, 1u16..=1000),
        c in 1usize..=48,
        seed in any::<u64>(),
        steps in 1usize..=255,
        inv in 0usize..=255,
        literal in any::<bool>(),
        occ in 0usize..3,
    ) {
        prop_assume!(g.validate().is_ok() && inv <= steps && g.gop_size <= 255 && g.p_count <= 255);
        let settings = CodecSettings {
            channels: c,
            seed,
            lambda: lambda_q as f64 / 16.0,
            steps,
            inv_steps: inv,
            start_policy: if literal { StartPolicy::Literal } else { StartPolicy::Consistent },
            occlusion: OcclusionMode::ALL[occ],
        };
        let h = ContainerHeader::new(&settings, &g, 4 * hw.0 as usize, 4 * hw.1 as usize).unwrap();
        let parsed = ContainerHeader::parse(&h.to_bytes()).unwrap();
        prop_assert_eq!(parsed, h);
        prop_assert_eq!(parsed.codec_settings(), settings);
        prop_assert_eq!(parsed.gop_config(), g);
    }
}

#[test]
fn closed_loop_in_every_mode_with_partial_gops() {
    let seq = synth_sequence(SequenceKind::MovingSquare, 7, 16, 16, 0).unwrap();
    let codec = Codec::new(small_settings()).unwrap();
    for mode in GopMode::ALL {
        let gop = GopConfig {
            mode,
            gop_size: 4,
            p_count: 2,
            i_count: 2,
        };
        let enc = codec.encode_sequence(&seq.frames, &gop).unwrap();
        assert_eq!(enc.records.len(), 7);
        let payloads: Vec<_> = enc.records.iter().map(|r| (r.frame_type, r.payload.clone())).collect();
        let dec = codec.decode_sequence(&payloads, &gop, 16, 16).unwrap();
        assert_eq!(dec, enc.recon, "{mode}");
    }
}

#[test]
fn golden_stream_is_stable() {
    let seq = synth_sequence(SequenceKind::MovingSquare, 5, 16, 16, 0).unwrap();
    let gop = GopConfig {
        mode: GopMode::LowDelayB,
        gop_size: 5,
        p_count: 1,
        i_count: 2,
    };
    let settings = small_settings();
    let header = ContainerHeader::new(&settings, &gop, 16, 16).unwrap();
    let codec = Codec::new(header.codec_settings()).unwrap();
    let enc = codec.encode_sequence(&seq.frames, &gop).unwrap();
    let bytes = Container::from_sequence(header, &enc).to_bytes().unwrap();
    let path = fixture("golden_stream.i2vc");
    if std::env::var_os("I2VC_BLESS").is_some() {
        std::fs::write(&path, &bytes).unwrap();
    }
    let golden = std::fs::read(&path).expect("golden stream fixture");
    assert_eq!(bytes, golden);
    let c = Container::parse(&golden).unwrap();
    let types: Vec<FrameType> = c.records.iter().map(|r| r.frame_type).collect();
    assert_eq!(types, [FrameType::I, FrameType::P, FrameType::B, FrameType::B, FrameType::B]);
    let dec = codec.decode_sequence(&c.payloads(), &c.header.gop_config(), 16, 16).unwrap();
    assert_eq!(dec, enc.recon);
}

#[test]
fn truncation_names_the_failing_record() {
    let seq = synth_sequence(SequenceKind::MovingSquare, 4, 16, 16, 0).unwrap();
    let gop = GopConfig::new(GopMode::LowDelayP).with_size(4);
    let header = ContainerHeader::new(&small_settings(), &gop, 16, 16).unwrap();
    let codec = Codec::new(header.codec_settings()).unwrap();
    let enc = codec.encode_sequence(&seq.frames, &gop).unwrap();
    let bytes = Container::from_sequence(header, &enc).to_bytes().unwrap();

    let cut = &bytes[..bytes.len() - 3];
    assert!(matches!(Container::parse(cut), Err(Error::TruncatedStream { frame_index: 3 })));
    assert!(matches!(Container::parse(&bytes[..HEADER_LEN + 2]), Err(Error::TruncatedStream { frame_index: 0 })));

    let mut payloads: Vec<_> = enc.records.iter().map(|r| (r.frame_type, r.payload.clone())).collect();
    let last = payloads.last_mut().unwrap();
    last.1 = Bitpayload::from_bytes(last.1.bytes[..2].to_vec());
    match codec.decode_sequence(&payloads, &gop, 16, 16) {
        Err(Error::TruncatedStream { frame_index }) => assert_eq!(frame_index, 3),
        other => panic!("expected truncation error, got {other:?}"),
    }
}

#[test]
fn corrupt_headers_are_rejected() {
    let gop = GopConfig::new(GopMode::RandomAccess);
    let mut bytes = ContainerHeader::new(&small_settings(), &gop, 16, 16).unwrap().to_bytes().to_vec();
    bytes[0] = b'X';
    assert!(matches!(Container::parse(&bytes), Err(Error::Format(_))));
    bytes[0] = b'I';
    bytes[4] = 9;
    assert!(matches!(Container::parse(&bytes), Err(Error::Format(_))));
}

#[test]
fn frame_type_mismatch_is_a_format_error() {
    let seq = synth_sequence(SequenceKind::Static, 2, 16, 16, 0).unwrap();
    let gop = GopConfig::new(GopMode::LowDelayP).with_size(2);
    let codec = Codec::new(small_settings()).unwrap();
    let enc = codec.encode_sequence(&seq.frames, &gop).unwrap();
    let payloads: Vec<_> = enc.records.iter().map(|r| (FrameType::I, r.payload.clone())).collect();
    assert!(matches!(codec.decode_sequence(&payloads, &gop, 16, 16), Err(Error::Format(_))));
}

#[test]
fn missing_reference_is_reported() {
    let seq = synth_sequence(SequenceKind::Static, 2, 16, 16, 0).unwrap();
    let gop = GopConfig::new(GopMode::LowDelayP).with_size(2);
    let s = schedule(&gop).unwrap();
    let p = s.by_display(1).unwrap();
    let codec = Codec::new(small_settings()).unwrap();
    let mut buffer = FeatureBuffer::new();
    match codec.compress_frame(&seq.frames[1], &mut buffer, p) {
        Err(Error::MissingReference { display_index, needed }) => assert_eq!((display_index, needed), (1, 0)),
        other => panic!("expected missing reference, got {other:?}"),
    }
}

#[test]
fn start_policies_differ_only_for_predicted_frames() {
    let seq = synth_sequence(SequenceKind::MovingSquare, 3, 16, 16, 0).unwrap();
    let gop = GopConfig::new(GopMode::LowDelayP).with_size(3);
    let run = |policy| {
        let codec = Codec::new(CodecSettings {
            start_policy: policy,
            ..small_settings()
        })
        .unwrap();
        codec.encode_sequence(&seq.frames, &gop).unwrap()
    };
    let (a, b) = (run(StartPolicy::Consistent), run(StartPolicy::Literal));
    assert_eq!(a.records[0].payload, b.records[0].payload);
    assert_eq!(a.recon[0].frame, b.recon[0].frame);
    assert_ne!(a.recon[1].denoised, b.recon[1].denoised);
}
