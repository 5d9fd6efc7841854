mod oracles;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stablemil::base::{fisher_encode, FisherEncoder, FisherNorm};
use oracles::{random_bag, random_gmm};
use stablemil::Bag;

#[test]
fn raw_encoding_matches_finite_difference_gradients() {
    let worst = oracles::fisher_worst_rel_error(10, 99);
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

#[test]
fn encoding_ignores_instance_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let gmm = random_gmm(&mut rng, 3, 4);
    let enc = FisherEncoder::new(gmm, FisherNorm::default());
    let bag = random_bag(&mut rng, 3, 12);
    let base = fisher_encode(&bag, &enc).unwrap();
    for _ in 0..50 {
        let mut inst = bag.instances().to_vec();
        inst.shuffle(&mut rng);
        let shuffled = fisher_encode(&Bag::new("b", inst, 0).unwrap(), &enc).unwrap();
        for (a, b) in base.iter().zip(&shuffled) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn normalized_encodings_have_unit_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let gmm = random_gmm(&mut rng, 2, 3);
        let enc = FisherEncoder::new(gmm, FisherNorm::default());
        let z = fisher_encode(&random_bag(&mut rng, 2, 5), &enc).unwrap();
        let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn power_normalization_is_signed_square_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let gmm = random_gmm(&mut rng, 2, 2);
    let raw_enc = FisherEncoder::new(gmm.clone(), FisherNorm { power_norm: false, l2_norm: false });
    let pow_enc = FisherEncoder::new(gmm, FisherNorm { power_norm: true, l2_norm: false });
    let bag = random_bag(&mut rng, 2, 6);
    let raw = raw_enc.encode_raw(&bag).unwrap();
    let pow = fisher_encode(&bag, &pow_enc).unwrap();
    for (r, p) in raw.iter().zip(&pow) {
        assert!((r.signum() * r.abs().sqrt() - p).abs() < 1e-12);
    }
}
