use ppimce::gc::builder::{benchmark, BENCHMARKS};
use ppimce::gc::parse_bristol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn shipped_bristol_files_match_generated_circuits() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../benchmarks");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for name in BENCHMARKS {
        let text = std::fs::read_to_string(format!("{dir}/{name}.txt")).unwrap();
        let shipped = parse_bristol(&text).unwrap();
        let built = benchmark(name).unwrap();
        // The writer copies repeated output wires with XOR gates.
        let (a, b) = (shipped.counts(), built.counts());
        assert_eq!((a.and, a.inv), (b.and, b.inv), "{name}");
        assert!(a.xor >= b.xor && a.xor - b.xor < built.output_bits(), "{name}");
        assert_eq!(shipped.inputs().iter().map(Vec::len).collect::<Vec<_>>(), built.inputs().iter().map(Vec::len).collect::<Vec<_>>());
        for _ in 0..20 {
            let v: Vec<u128> = built.inputs().iter().map(|g| rng.gen::<u128>() >> (128 - g.len())).collect();
            assert_eq!(shipped.eval_words(&v).unwrap(), built.eval_words(&v).unwrap(), "{name}");
        }
    }
}
