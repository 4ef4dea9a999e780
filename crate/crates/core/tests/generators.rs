use furst::generators::{gen_cantor_target, gen_random, gen_train_track, FurstInstance, GeneratorKind};
use furst::Scale;

const LOG3_2: f64 = 0.630_929_753_571_457_4;

fn sc(k: u32) -> Scale {
    Scale::new(k).unwrap()
}

#[test]
fn cantor_target_passes_invariants() {
    for k in 6..=8 {
        let inst = gen_cantor_target(LOG3_2, LOG3_2, sc(k), 3).unwrap();
        assert!(inst.invariants.holds(), "k={k}: {:?}", inst.invariants);
        assert!((inst.achieved_alpha - LOG3_2).abs() < 0.1);
    }
}

#[test]
fn cantor_target_is_deterministic() {
    let a = gen_cantor_target(0.5, 0.5, sc(7), 11).unwrap();
    let b = gen_cantor_target(0.5, 0.5, sc(7), 11).unwrap();
    assert_eq!(a, b);
}

#[test]
fn full_cantor_target_fills_the_sector() {
    let inst = gen_cantor_target(1.0, 1.0, sc(7), 0).unwrap();
    // Sector of angular width π/4 between radii 1/2 and 1.
    let area = std::f64::consts::FRAC_PI_4 / 2.0 * (1.0 - 0.25);
    let ratio = inst.e_measure() / area;
    assert!((0.25..=4.0).contains(&ratio), "{ratio}");
}

#[test]
fn train_track_measure_matches_product() {
    let s = sc(8);
    let inst = gen_train_track(0.5, 1.0, s, 5).unwrap();
    assert!(inst.invariants.holds());
    let ratio = inst.e_measure() / s.delta().powf(2.0 - 1.5);
    assert!((1.0 / 16.0..=16.0).contains(&ratio), "{ratio}");
}

#[test]
fn random_instances_pass_invariants() {
    for (a, b, k) in [(0.8, 0.6, 6), (0.5, 1.0, 7), (0.3, 0.4, 8), (1.0, 2.0, 5)] {
        let inst = gen_random(a, b, sc(k), 9).unwrap();
        assert!(inst.invariants.holds(), "{a} {b} {k}: {:?}", inst.invariants);
    }
}

#[test]
fn random_seeds_differ() {
    let a = gen_random(0.6, 0.6, sc(6), 1).unwrap();
    let b = gen_random(0.6, 0.6, sc(6), 2).unwrap();
    assert_ne!(a.e_union, b.e_union);
}

#[test]
fn near_kakeya_random_instance_covers_the_disc() {
    let s = sc(5);
    let inst = gen_random(1.0, 2.0, s, 4).unwrap();
    let disc = std::f64::consts::PI * 4.0;
    let ratio = inst.e_measure() / disc;
    assert!((1.0 / 16.0..=16.0).contains(&ratio), "{ratio}");
}

#[test]
fn directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, inst) in [
        (GeneratorKind::CantorTarget, gen_cantor_target(0.5, 0.5, sc(6), 1).unwrap()),
        (GeneratorKind::TrainTrack, gen_train_track(0.5, 0.5, sc(6), 1).unwrap()),
        (GeneratorKind::Random, gen_random(0.5, 0.5, sc(6), 1).unwrap()),
    ] {
        let path = dir.path().join(kind.to_string());
        inst.write_dir(&path).unwrap();
        let back = FurstInstance::read_dir(&path).unwrap();
        assert_eq!(back.omega, inst.omega, "omega");
        assert_eq!(back.r_sets, inst.r_sets, "r");
        assert_eq!(back.invariants, inst.invariants, "inv");
        assert_eq!(back, inst);
    }
}

#[test]
fn directory_bytes_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_train_track(0.5, 0.5, sc(6), 2).unwrap();
    inst.write_dir(&dir.path().join("a")).unwrap();
    inst.write_dir(&dir.path().join("b")).unwrap();
    for name in ["manifest.json", "family.json", "r_sets/r_000000.bin.gz"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}
