use lis_core::chain::{decode_message, encode_message, run_chain, ChainTopology};
use lis_core::channel::{build_los_matrix, complex_gaussian};
use lis_core::equalize::{centralized_equalize, local_contribution, split_panels, AggregateState, EqualizerKind};
use lis_core::latency::{default_total_latency, CycleModel};
use lis_core::linalg::{gramian, hermitian_rcond, rel_diff_vec, CMatrix, CVector};
use lis_core::metrics::SeSummary;
use lis_core::scenario::{build_wall_layout, place_users_with, RoomSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_channel(seed: u64, m: usize, k: usize) -> (CMatrix, CVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = CMatrix::from_fn(m, k, |_, _| complex_gaussian(&mut rng, 1.0));
    let y = CVector::from_fn(m, |_, _| complex_gaussian(&mut rng, 1.0));
    (h, y)
}

fn kind() -> impl Strategy<Value = EqualizerKind> {
    prop::sample::select(EqualizerKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wire_round_trip(seed in any::<u64>(), k in 1usize..24, n in 1usize..6, kind in kind()) {
        let (h, y) = random_channel(seed, n * k, k);
        let c = local_contribution(&h, &y, kind.needs_gramian(), 0).unwrap();
        let state = AggregateState::empty(k, kind.needs_gramian()).absorb(&c).unwrap();
        let bytes = encode_message(&state, kind).unwrap();
        let (decoded_kind, decoded) = decode_message(&bytes).unwrap();
        prop_assert_eq!(decoded_kind, kind);
        prop_assert_eq!(&decoded.z_mrc_sum, &state.z_mrc_sum);
        prop_assert_eq!(decoded.panels_absorbed, 1);
        if let (Some(a), Some(b)) = (&decoded.gramian_sum, &state.gramian_sum) {
            prop_assert!((a - b).norm() <= 1e-12 * b.norm());
        }
    }

    #[test]
    fn truncated_messages_are_rejected(seed in any::<u64>(), k in 1usize..8, cut in 1usize..40) {
        let (h, y) = random_channel(seed, 2 * k, k);
        let c = local_contribution(&h, &y, true, 0).unwrap();
        let state = AggregateState::empty(k, true).absorb(&c).unwrap();
        let bytes = encode_message(&state, EqualizerKind::Zf).unwrap();
        let cut = cut.min(bytes.len());
        prop_assert!(decode_message(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn chain_matches_central(seed in any::<u64>(), n in 1usize..9, p in 1usize..17, k in 1usize..9, kind in kind()) {
        let m = n * p;
        prop_assume!(k <= m / 2);
        let (h, y) = random_channel(seed, m, k);
        let parts = split_panels(&h, &y, p).unwrap();
        let dec = run_chain(&ChainTopology::linear(p), &parts, kind, 0.5).unwrap();
        let central = centralized_equalize(&h, &y, kind, 0.5).unwrap();
        prop_assert!(rel_diff_vec(&dec.equalized, &central) < 1e-10);
        prop_assert_eq!(dec.hops.len(), p - 1);
    }

    #[test]
    fn gramian_is_hermitian_psd(seed in any::<u64>(), m in 1usize..40, k in 1usize..10) {
        let (h, _) = random_channel(seed, m, k);
        let (_, x) = random_channel(seed.wrapping_add(1), k, 1);
        let g = gramian(&h);
        prop_assert!((&g - g.adjoint()).norm() <= 1e-12 * g.norm());
        let q = x.dotc(&(&g * &x));
        prop_assert!(q.re >= -1e-9 * g.norm() * x.norm_squared());
        if m >= k {
            prop_assert!(hermitian_rcond(&g) > 0.0);
        }
    }

    #[test]
    fn layouts_stay_on_walls(log_p in 0u32..8, log_n in 0u32..7) {
        let room = RoomSpec::default();
        let (p, n) = (1usize << log_p, 1usize << log_n);
        let array = match build_wall_layout(&room, p * n, p, 1.5) {
            Ok(a) => a,
            Err(_) => return Ok(()),
        };
        prop_assert_eq!(array.total_antennas(), p * n);
        prop_assert_eq!(array.panel_count, p);
        let spacing = room.wavelength_m() / 2.0;
        for (i, pos) in array.positions.iter().enumerate() {
            prop_assert!(pos.x > 0.0 && pos.x < room.length_m);
            prop_assert!(pos.y == 0.0 || pos.y == room.width_m);
            prop_assert!(pos.z >= 1.5);
            prop_assert!(array.panel_range(array.panel_index[i]).contains(&i));
            let inward = if pos.y == 0.0 { 1.0 } else { -1.0 };
            prop_assert_eq!(array.normals[i].y, inward);
        }
        for a in 0..array.positions.len() {
            for b in (a + 1)..array.positions.len() {
                if array.panel_index[a] != array.panel_index[b] {
                    prop_assert!((array.positions[a] - array.positions[b]).norm() >= spacing - 1e-12);
                }
            }
        }
    }

    #[test]
    fn users_stay_clear_of_walls(seed in any::<u64>(), k in 1usize..64) {
        let room = RoomSpec::default();
        let inset = 10.0 * room.wavelength_m();
        let ues = place_users_with(&room, k, 1.5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(ues.len(), k);
        for u in &ues.positions {
            prop_assert!(u.x >= inset && u.x <= room.length_m - inset);
            prop_assert!(u.y >= inset && u.y <= room.width_m - inset);
            prop_assert_eq!(u.z, 1.5);
        }
        let array = build_wall_layout(&room, 64, 4, 1.5).unwrap();
        let h = build_los_matrix(&array, &ues, room.wavelength_m()).unwrap();
        prop_assert!(h.iter().all(|v| v.norm() > 0.0 && v.norm().is_finite()));
    }

    #[test]
    fn percentiles_are_ordered(values in prop::collection::vec(-5.0f64..20.0, 1..200)) {
        let s = SeSummary::from_values(values.clone(), &[5.0, 50.0, 95.0], 1, values.len(), 0);
        let (p5, p50, p95) = (s.percentile(5.0).unwrap(), s.percentile(50.0).unwrap(), s.percentile(95.0).unwrap());
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= p5 && p5 <= p50 && p50 <= p95 && p95 <= hi);
    }

    #[test]
    fn mrc_latency_grows_with_panels(log_k in 0u32..8, p in 1usize..200) {
        let model = CycleModel::measured();
        let k = 1usize << log_k;
        let a = default_total_latency(&model, 16, k, p, EqualizerKind::Mrc).unwrap();
        let b = default_total_latency(&model, 16, k, p + 1, EqualizerKind::Mrc).unwrap();
        prop_assert!((b.total_us - a.total_us - 0.87).abs() < 1e-9);
        let zf = default_total_latency(&model, 16, k, p, EqualizerKind::Zf).unwrap();
        prop_assert!(zf.total_us >= a.total_us);
    }
}
