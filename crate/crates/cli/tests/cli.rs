use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use i2vc::container::Container;
use i2vc::gop::FrameType;
use tempfile::TempDir;

const FAST: [&str; 4] = ["--tsteps", "4", "--invsteps", "2"];

fn i2vc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_i2vc"))
        .args(args)
        .env_remove("I2VC_SEED")
        .output()
        .unwrap()
}

fn i2vc_env(args: &[&str], seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_i2vc"))
        .args(args)
        .env("I2VC_SEED", seed)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn assert_single_line_error(o: &Output) {
    let e = stderr(o);
    assert_eq!(e.lines().count(), 1, "{e}");
    assert!(e.starts_with("i2vc: "), "{e}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, frames: usize, size: usize) {
    let (f, s) = (frames.to_string(), size.to_string());
    let o = i2vc(&["synth", p(dir), "--frames", &f, "--height", &s, "--width", &s]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

fn encode(input: &Path, output: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["encode", p(input), p(output)];
    args.extend(FAST);
    args.extend(extra);
    i2vc(&args)
}

#[test]
fn random_access_stream_has_two_intra_frames() {
    let t = TempDir::new().unwrap();
    let input = t.path().join("in");
    synth(&input, 32, 16);
    let out = t.path().join("s.i2vc");
    let o = encode(&input, &out, &["--mode", "RA", "--gop", "32", "--icount", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("I=2 P=0 B=30"));
    let c = Container::parse(&fs::read(&out).unwrap()).unwrap();
    let count = |t| c.records.iter().filter(|r| r.frame_type == t).count();
    assert_eq!((count(FrameType::I), count(FrameType::P), count(FrameType::B)), (2, 0, 30));
}

#[test]
fn encode_is_deterministic_and_decode_matches_recon() {
    let t = TempDir::new().unwrap();
    let input = t.path().join("in");
    synth(&input, 6, 16);
    let (a, b) = (t.path().join("a.i2vc"), t.path().join("b.i2vc"));
    let recon = t.path().join("recon");
    for (out, extra) in [(&a, vec!["--recon", p(&recon)]), (&b, vec![])] {
        let mut args = vec!["--mode", "LDB", "--gop", "6", "--pcount", "2"];
        args.extend(extra);
        let o = encode(&input, out, &args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let decoded = t.path().join("dec");
    let o = i2vc(&["decode", p(&a), p(&decoded)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for i in 0..6 {
        let name = format!("frame_{i:05}.rgbp");
        assert_eq!(fs::read(recon.join(&name)).unwrap(), fs::read(decoded.join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn empty_input_is_a_validation_error() {
    let t = TempDir::new().unwrap();
    let input = t.path().join("in");
    fs::create_dir(&input).unwrap();
    let out = t.path().join("s.i2vc");
    let o = encode(&input, &out, &[]);
    assert_eq!(code(&o), 5);
    assert_single_line_error(&o);
    assert!(!out.exists());
}

#[test]
fn corrupt_magic_is_rejected_without_output() {
    let t = TempDir::new().unwrap();
    let input = t.path().join("in");
    synth(&input, 2, 16);
    let s = t.path().join("s.i2vc");
    assert_eq!(code(&encode(&input, &s, &["--mode", "AI"])), 0);
    let mut bytes = fs::read(&s).unwrap();
    bytes[1] ^= 0xff;
    fs::write(&s, &bytes).unwrap();
    let out = t.path().join("dec");
    let o = i2vc(&["decode", p(&s), p(&out)]);
    assert_eq!(code(&o), 6);
    assert_single_line_error(&o);
    assert!(!out.exists());
}

#[test]
fn truncated_stream_names_the_frame() {
    let t = TempDir::new().unwrap();
    let input = t.path().join("in");
    synth(&input, 3, 16);
    let s = t.path().join("s.i2vc");
    assert_eq!(code(&encode(&input, &s, &["--mode", "LDP", "--gop", "3"])), 0);
    let bytes = fs::read(&s).unwrap();
    fs::write(&s, &bytes[..bytes.len() - 4]).unwrap();
    let out = t.path().join("dec");
    let o = i2vc(&["decode", p(&s), p(&out)]);
    assert_eq!(code(&o), 7);
    assert_single_line_error(&o);
    assert!(stderr(&o).contains("frame record 2"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn schedule_lists_one_gop() {
    let o = i2vc(&["schedule", "--mode", "LDB", "--gop", "32", "--pcount", "6"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let types: Vec<&str> = text.lines().map(|l| l.split_whitespace().nth(2).unwrap()).collect();
    assert_eq!(types.len(), 32);
    let count = |t| types.iter().filter(|&&x| x == t).count();
    assert_eq!((count("I"), count("P"), count("B")), (1, 6, 25));
}

#[test]
fn eval_emits_one_row_per_lambda() {
    let t = TempDir::new().unwrap();
    let input = t.path().join("in");
    synth(&input, 4, 16);
    let mut args = vec!["eval", p(&input), "--mode", "LDP", "--gop", "4"];
    args.extend(FAST);
    let o = i2vc(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 2);

    args.extend(["--lambdas", "8,32,128,512"]);
    let o = i2vc(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let bpp: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(bpp.len(), 4);
    assert!(bpp.windows(2).all(|w| w[0] < w[1]), "{bpp:?}");
}

#[test]
fn configuration_errors_exit_with_code_four() {
    let t = TempDir::new().unwrap();
    let cfg = t.path().join("run.toml");
    fs::write(&cfg, "lambda = 900\n").unwrap();
    let o = i2vc(&["schedule", "--config", p(&cfg)]);
    assert_eq!(code(&o), 4);
    assert_single_line_error(&o);

    fs::write(&cfg, "mode = \"LDB\"\ngop_size = 8\np_count = 2\n").unwrap();
    let o = i2vc(&["schedule", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().filter(|l| l.contains(" P ")).count(), 2);
    let o = i2vc(&["schedule", "--config", p(&cfg), "--pcount", "3"]);
    assert_eq!(stdout(&o).lines().filter(|l| l.contains(" P ")).count(), 3);

    let o = i2vc(&["schedule", "--mode", "LDB", "--gop", "4", "--pcount", "4"]);
    assert_eq!(code(&o), 4);
    let o = i2vc(&["schedule", "--mode", "XYZ"]);
    assert_eq!(code(&o), 2);
    assert_single_line_error(&o);
    let o = i2vc_env(&["schedule"], "not-a-number");
    assert_eq!(code(&o), 4);
}

#[test]
fn seed_comes_from_environment_unless_flagged() {
    let t = TempDir::new().unwrap();
    let input = t.path().join("in");
    synth(&input, 2, 16);
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = t.path().join(name);
        let mut args = vec!["encode", p(&input), p(&out), "--mode", "AI"];
        args.extend(FAST);
        if let Some(s) = flag {
            args.extend(["--seed", s]);
        }
        let o = match env {
            Some(s) => i2vc_env(&args, s),
            None => i2vc(&args),
        };
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read(out).unwrap()
    };
    let default = run("a", None, None);
    let env = run("b", Some("5"), None);
    let flagged = run("c", None, Some("5"));
    let overridden = run("d", Some("9"), Some("0"));
    assert_ne!(default, env);
    assert_eq!(env, flagged);
    assert_eq!(default, overridden);
}

#[test]
fn existing_output_directories_are_not_clobbered() {
    let t = TempDir::new().unwrap();
    let input = t.path().join("in");
    synth(&input, 2, 16);
    let s = t.path().join("s.i2vc");
    assert_eq!(code(&encode(&input, &s, &["--mode", "AI"])), 0);
    let out = t.path().join("dec");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), b"x").unwrap();
    let o = i2vc(&["decode", p(&s), p(&out)]);
    assert_eq!(code(&o), 3);
    assert_single_line_error(&o);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 1);
}
