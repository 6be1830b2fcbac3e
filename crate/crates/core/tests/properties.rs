use hodm_core::blockchannel::bessel_j;
use hodm_core::capacity::{find_instantaneous_level, waterfill};
use hodm_core::geometry::fresnel_coefficient;
use hodm_core::modem::{
    add_cyclic_prefix, hodm_demodulate, hodm_modulate, remove_cyclic_prefix, ReceivedFrame, SymbolGrid,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid(nn: usize, mm: usize, vals: &[(f64, f64)]) -> SymbolGrid {
    let mut it = vals.iter().cycle();
    SymbolGrid::from_fn(nn, mm, |_, _| {
        let (re, im) = it.next().unwrap();
        Complex64::new(*re, *im)
    })
}

fn receive(s: &SymbolGrid) -> ReceivedFrame {
    let x = hodm_modulate(s);
    ReceivedFrame::new(x.num_elements(), x.body_len(), x.body_samples(), 0.0).unwrap()
}

proptest! {
    #[test]
    fn modulation_round_trip(nn in 1usize..12, mm in 1usize..12, vals in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..50)) {
        let s = grid(nn, mm, &vals);
        let back = hodm_demodulate(&receive(&s));
        for (a, b) in s.values().iter().zip(back.values()) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn parseval(nn in 1usize..12, mm in 1usize..12, vals in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..50)) {
        let s = grid(nn, mm, &vals);
        let x = hodm_modulate(&s);
        prop_assert!((x.energy() - (nn * mm) as f64 * s.energy()).abs() <= 1e-9 * x.energy().max(1.0));
    }

    #[test]
    fn cyclic_prefix_is_transparent(nn in 1usize..8, mm in 2usize..12, cp_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let cp = ((mm - 1) as f64 * cp_frac) as usize;
        let x = hodm_modulate(&SymbolGrid::random_qpsk(nn, mm, seed));
        let y = remove_cyclic_prefix(&add_cyclic_prefix(&x, cp).unwrap());
        prop_assert_eq!(x.body_samples(), y.body_samples());
    }

    #[test]
    fn fresnel_is_a_passive_reflection(alpha in 1e-6f64..std::f64::consts::FRAC_PI_2, eps in 1.0001f64..80.0) {
        let f = fresnel_coefficient(alpha, eps).unwrap();
        prop_assert!(f > -1.0 && f < 1.0);
    }

    #[test]
    fn bessel_bounded_and_reflected(l in -64i32..=64, z in 0.0f64..100.0) {
        let j = bessel_j(l, z).unwrap();
        prop_assert!(j.abs() <= 1.0 + 1e-12);
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert_eq!(bessel_j(-l, z).unwrap(), sign * j);
    }

    #[test]
    fn waterfill_kkt(gains in prop::collection::vec(0.01f64..10.0, 1..16), noise in 0.01f64..2.0, budget in 0.01f64..100.0) {
        let h: Vec<Complex64> = gains.iter().map(|&g| Complex64::new(g, 0.0)).collect();
        let s2 = vec![noise; h.len()];
        let level = find_instantaneous_level(&h, &s2, budget).unwrap();
        let a = waterfill(&h, &s2, level).unwrap();
        let total: f64 = a.powers.iter().sum();
        prop_assert!((total - budget).abs() <= 1e-9 * budget);
        for (p, g) in a.powers.iter().zip(&gains) {
            let inv = noise / (g * g);
            prop_assert!(*p >= 0.0);
            if *p > 0.0 {
                // active blocks all reach the same level
                prop_assert!((p + inv - level).abs() <= 1e-9 * level);
            } else {
                prop_assert!(inv >= level * (1.0 - 1e-12));
            }
        }
    }
}
