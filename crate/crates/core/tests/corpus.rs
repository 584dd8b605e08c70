//! Replays the fuzz corpus and seeded byte mutations of it through the decoders.

use std::fs;
use std::path::PathBuf;

use modcp::io::{matrix_from_json, JsonMatrix, MapWitness, ProblemFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<Vec<u8>> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| fs::read(e.unwrap().path()).unwrap())
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

fn mutate(rng: &mut ChaCha8Rng, seed: &[u8]) -> Vec<u8> {
    const TOKENS: [&[u8]; 8] = [
        b"0", b"-1", b"1e308", b"[", b"]", b"{}", b"\"A\"", b"[[1,0]]",
    ];
    let mut v = seed.to_vec();
    for _ in 0..rng.random_range(1..=4) {
        let at = rng.random_range(0..=v.len());
        match rng.random_range(0..3) {
            0 if !v.is_empty() => {
                let end = (at + rng.random_range(1..=8)).min(v.len());
                v.drain(at.min(end)..end);
            }
            1 => {
                let t = TOKENS[rng.random_range(0..TOKENS.len())];
                v.splice(at..at, t.iter().copied());
            }
            _ if !v.is_empty() => {
                let i = at.min(v.len() - 1);
                v[i] = rng.random();
            }
            _ => {}
        }
    }
    v
}

fn drive(target: &str, rounds: usize, f: impl Fn(&[u8])) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    for seed in seeds(target) {
        f(&seed);
        for _ in 0..rounds {
            f(&mutate(&mut rng, &seed));
        }
    }
}

#[test]
fn problem_files_never_panic() {
    drive("problem_file", 300, |data| {
        if let Ok(file) = std::str::from_utf8(data)
            .map_err(drop)
            .and_then(|t| ProblemFile::parse(t).map_err(drop))
        {
            let _ = file.resolve();
        }
    });
}

#[test]
fn matrices_never_panic() {
    drive("json_matrix", 300, |data| {
        if let Ok(m) = serde_json::from_slice::<JsonMatrix>(data) {
            let _ = matrix_from_json(&m);
        }
    });
}

#[test]
fn map_witnesses_round_trip() {
    drive("map_witness", 300, |data| {
        if let Ok(w) = serde_json::from_slice::<MapWitness>(data) {
            if let Ok(map) = w.to_map() {
                assert_eq!(MapWitness::of(&map).to_map().unwrap(), map);
            }
        }
    });
}

#[test]
fn oversized_algebras_are_rejected() {
    let text = r#"{"version": 1, "algebras": {"A": {"blocks": [4294967296]}}, "task": "check"}"#;
    assert!(ProblemFile::parse(text).unwrap().resolve().is_err());
}
