use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cherednik::affine_weyl::{random_element, AffineWeylElement};
use cherednik::cli_io::RunConfig;
use cherednik::cocycle::{j, j_translation_trivial_product};
use cherednik::root_system::{multiplicity_orbits, CartanType, LatticeChoice, RootSystem};
use cherednik::sampling;
use cherednik::scalar::{q, Cq, Q};
use cherednik::wmodules::ModuleRep;

#[test]
fn cocycle_identity_on_two_dim_module() {
    let rs = RootSystem::new(CartanType::B2, LatticeChoice::Coweight).unwrap();
    let rep = ModuleRep::two_dim(&rs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let k = sampling::multiplicity(&mut rng, Arc::new(multiplicity_orbits(&rs)));
    for _ in 0..10 {
        let lam = sampling::regular_lambda(&mut rng, &rs, &k);
        let (lg, lh) = (rng_len(&mut rng), rng_len(&mut rng));
        let g = random_element(&rs, &mut rng, lg);
        let h = random_element(&rs, &mut rng, lh);
        let lhs = j(&rs, &g.mul(&h), &lam, &rep, &k).unwrap();
        let rhs = j(&rs, &g, &h.act(&lam), &rep, &k).unwrap().mul(&j(&rs, &h, &lam, &rep, &k).unwrap());
        assert!(lhs == rhs);
    }
}

fn rng_len(rng: &mut ChaCha8Rng) -> usize {
    use rand::Rng;
    rng.gen_range(0..=5)
}

#[test]
fn translation_cocycle_matches_closed_form() {
    let rs = RootSystem::new(CartanType::A(2), LatticeChoice::Coweight).unwrap();
    let triv = ModuleRep::trivial(&rs);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let k = sampling::multiplicity(&mut rng, Arc::new(multiplicity_orbits(&rs)));
    let lam = sampling::regular_lambda(&mut rng, &rs, &k);
    let ys: [[Q; 3]; 3] = [
        [q(2, 3), q(-1, 3), q(-1, 3)],
        [q(1, 3), q(1, 3), q(-2, 3)],
        [q(1, 1), q(0, 1), q(-1, 1)],
    ];
    for y in &ys {
        let t = AffineWeylElement::translation(y);
        let m = j(&rs, &t, &lam, &triv, &k).unwrap();
        let closed: Cq = j_translation_trivial_product(&rs, y, &lam, &k).unwrap();
        assert!(m[(0, 0)] == closed, "y = {y:?}");
    }
}

#[test]
fn shipped_configs_round_trip() {
    for name in ["a2_example.toml", "sl2_weak.toml", "a1_limits.toml"] {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
        let cfg = RunConfig::load(&path).unwrap();
        let text = cfg.to_toml().unwrap();
        let again = RunConfig::from_toml(&text).unwrap();
        assert_eq!(text, again.to_toml().unwrap(), "{name}");
        cfg.setup().unwrap();
    }
}
