//! Property tests for the combinatorial and thermodynamic invariants.

use num_bigint::BigUint;
use orbitflow_core::counting::OrbitTable;
use orbitflow_core::symbolic::{
    birkhoff_sum, canonical_rotation, count_periodic_points, is_lyndon, prime_orbit_counts, recode_depth_one,
    verify_mixing, CylinderFunction, EnumerationOptions, Roof, Subshift, TransitionMatrix,
};
use orbitflow_core::suspension::SuspensionSystem;
use orbitflow_core::{models, par, thermo};
use proptest::prelude::*;

fn mixing_shift() -> impl Strategy<Value = Subshift> {
    (2usize..=3)
        .prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0u8..=1, n), n))
        .prop_filter_map("not mixing", |rows| {
            let t = TransitionMatrix::new(rows).ok()?;
            verify_mixing(&t).ok()?.is_mixing().then(|| Subshift::new(t).unwrap())
        })
}

/// A cyclically admissible word of length `len` on `shift`, driven by `picks`.
fn cyclic_word(shift: &Subshift, picks: &[usize]) -> Option<Vec<u16>> {
    let n = shift.alphabet_size();
    let mut w = vec![(picks[0] % n) as u16];
    for &p in &picks[1..] {
        let last = *w.last().unwrap();
        let next: Vec<u16> = (0..n as u16).filter(|&b| shift.allows(last, b)).collect();
        w.push(next[p % next.len()]);
    }
    shift.is_cyclically_admissible(&w).then_some(w)
}

fn rotate(w: &[u16], r: usize) -> Vec<u16> {
    let r = r % w.len();
    w[r..].iter().chain(&w[..r]).copied().collect()
}

fn divisors(n: usize) -> impl Iterator<Item = usize> {
    (1..=n).filter(move |d| n % d == 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn necklace_identity(shift in mixing_shift(), n in 1usize..=9) {
        let counts = prime_orbit_counts(&shift, n).unwrap();
        let lhs: BigUint = divisors(n).map(|d| BigUint::from(d as u64 * counts[d - 1])).sum();
        prop_assert_eq!(lhs, count_periodic_points(&shift, n).unwrap());
    }

    #[test]
    fn canonical_rotation_is_a_class_invariant(w in prop::collection::vec(0u16..3, 1..10), r in 0usize..10) {
        let c = canonical_rotation(&w);
        prop_assert_eq!(&canonical_rotation(&rotate(&w, r)), &c);
        prop_assert!(c <= rotate(&w, r));
        let primitive = divisors(w.len()).filter(|&d| d < w.len()).all(|d| rotate(&w, d) != w);
        prop_assert_eq!(is_lyndon(&w), primitive && c == w);
    }

    #[test]
    fn birkhoff_sums_rotate_and_add(
        shift in mixing_shift(),
        picks in prop::collection::vec(0usize..8, 1..12),
        vals in prop::collection::vec(-2.0f64..2.0, 27),
        r in 0usize..12,
        a in -3.0f64..3.0,
    ) {
        let Some(w) = cyclic_word(&shift, &picks) else { return Ok(()) };
        let mut it = vals.iter().cycle().copied();
        let f = CylinderFunction::from_fn(&shift, 2, |_| it.next().unwrap()).unwrap();
        let g = CylinderFunction::from_fn(&shift, 3, |_| it.next().unwrap()).unwrap();
        let sf = birkhoff_sum(&w, &f).unwrap();
        let sg = birkhoff_sum(&w, &g).unwrap();
        prop_assert!((birkhoff_sum(&rotate(&w, r), &f).unwrap() - sf).abs() <= 1e-12 * (1.0 + sf.abs()));
        let h = f.combine(a, &g, 1.0).unwrap();
        let sh = birkhoff_sum(&w, &h).unwrap();
        prop_assert!((sh - (a * sf + sg)).abs() <= 1e-11 * (1.0 + sh.abs()));
        let doubled: Vec<u16> = w.iter().chain(&w).copied().collect();
        prop_assert!((birkhoff_sum(&doubled, &f).unwrap() - 2.0 * sf).abs() <= 1e-11 * (1.0 + sf.abs()));
    }

    #[test]
    fn recoding_preserves_cyclic_sums(
        shift in mixing_shift(),
        picks in prop::collection::vec(0usize..8, 1..10),
        vals in prop::collection::vec(-1.0f64..1.0, 81),
    ) {
        let mut it = vals.iter().cycle().copied();
        let f = CylinderFunction::from_fn(&shift, 4, |_| it.next().unwrap()).unwrap();
        let rec = recode_depth_one(&shift, std::slice::from_ref(&f)).unwrap();
        prop_assert_eq!(rec.fns[0].depth(), 2);
        let Some(w) = cyclic_word(&shift, &picks) else { return Ok(()) };
        let coded = rec.encode_cyclic(&w).expect("admissible word encodes");
        let lhs = birkhoff_sum(&w, &f).unwrap();
        let rhs = birkhoff_sum(&coded, &rec.fns[0]).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        // Periodic-point counts survive the recoding too.
        for n in 1..=5 {
            prop_assert_eq!(count_periodic_points(&shift, n).unwrap(), count_periodic_points(&rec.shift, n).unwrap());
        }
    }

    #[test]
    fn pressure_shifts_and_is_monotone(
        shift in mixing_shift(),
        vals in prop::collection::vec(-1.0f64..1.0, 9),
        c in -2.0f64..2.0,
        bump in 0.0f64..1.0,
    ) {
        let mut it = vals.iter().cycle().copied();
        let phi = CylinderFunction::from_fn(&shift, 2, |_| it.next().unwrap()).unwrap();
        let p = thermo::pressure(&shift, &phi).unwrap();
        let shifted = phi.map(|x| x + c);
        prop_assert!((thermo::pressure(&shift, &shifted).unwrap() - (p + c)).abs() <= 1e-10);
        let bigger = phi.map(|x| x + bump);
        prop_assert!(thermo::pressure(&shift, &bigger).unwrap() >= p - 1e-12);
        prop_assert!(p >= phi.min() - 1e-12 && p <= phi.max() + (shift.alphabet_size() as f64).ln() + 1e-12);
    }

    #[test]
    fn gibbs_cylinders_sum_to_one(shift in mixing_shift(), vals in prop::collection::vec(-1.0f64..1.0, 27), n in 1usize..=4) {
        let mut it = vals.iter().cycle().copied();
        let phi = CylinderFunction::from_fn(&shift, 3, |_| it.next().unwrap()).unwrap();
        let g = thermo::rpf(&shift, &phi).unwrap();
        let words = orbitflow_core::symbolic::admissible_words(&shift, n).unwrap();
        let total: f64 = words.iter().map(|w| g.cylinder_measure(w.symbols()).unwrap()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10, "{total}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn normalization_makes_flow_pressure_vanish(seed in any::<u64>(), index in 0u64..4) {
        let sys = models::random_symbolic(seed, index).unwrap();
        let shifted = thermo::shifted_potential(sys.psi(), sys.roof().function(), sys.c()).unwrap();
        prop_assert!(thermo::pressure(sys.base(), &shifted).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn orbit_tables_do_not_depend_on_workers(seed in any::<u64>(), index in 0u64..4, budget in 4.0f64..9.0) {
        let sys = models::random_symbolic(seed, index).unwrap();
        let k = models::random_observable(&sys, seed, index).unwrap();
        let opts = EnumerationOptions::default();
        let one = par::with_workers(1, || OrbitTable::build(&sys, &k, budget, &opts).unwrap());
        let three = par::with_workers(3, || OrbitTable::build(&sys, &k, budget, &opts).unwrap());
        prop_assert_eq!(one.instances(), three.instances());
        prop_assert_eq!(one.orbits(), three.orbits());
        prop_assert!(one.instances().windows(2).all(|w| w[0].total_length <= w[1].total_length));
    }
}

#[test]
fn unit_roof_orbit_lengths_are_periods() {
    let s = Subshift::full(3);
    let sys = SuspensionSystem::new(s.clone(), CylinderFunction::zero(&s), Roof::constant(&s, 1.0).unwrap()).unwrap();
    let k = CylinderFunction::constant(&s, 1, 1.0).unwrap();
    let table = OrbitTable::build(&sys, &k, 6.0, &EnumerationOptions::default()).unwrap();
    assert!(table.orbits().iter().all(|o| (o.length - o.period() as f64).abs() < 1e-12));
    assert_eq!(table.orbits().len() as u64, prime_orbit_counts(&s, 6).unwrap().iter().sum::<u64>());
}
