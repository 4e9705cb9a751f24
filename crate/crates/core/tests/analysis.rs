use powersim::analysis::{
    build_metrics_table, default_metrics_inputs, energy_eq1, p_avg_model, reference, t95, RowLatency,
};
use powersim::{EnergyModelParams, Exact, ExactEnergyModelParams, MetricsInputs};
use proptest::prelude::*;

fn q(n: i64, d: i64) -> Exact {
    Exact::new(n, d)
}

#[test]
fn default_operating_point_is_250_wh() {
    assert!((energy_eq1(&EnergyModelParams::default()).unwrap() - 250.0).abs() < 1e-9);
    let exact = ExactEnergyModelParams {
        p_full_speed: q(200, 1),
        s: q(1, 1),
        rho: q(1, 2),
        k: q(3, 5),
        k_prime: q(1, 10),
        t_interval: q(2, 1),
        t_sleep: q(1, 2),
    };
    assert_eq!(energy_eq1(&exact).unwrap(), q(250, 1));
}

#[test]
fn exact_table_agrees_with_float_table() {
    let float = build_metrics_table(&default_metrics_inputs()).unwrap();
    let exact_inputs = powersim::analysis::MetricsInputs::<Exact> {
        energy: q(250, 1),
        n_sleeping: 10,
        t_setups: (15..=19).map(|m| q(m, 1)).collect(),
        p_sleeps: [0, 28, 56, 84].iter().map(|&p| q(p, 1)).collect(),
        latency: [2, 2, 3, 5, 6]
            .iter()
            .map(|&m| RowLatency::AnchorPpw(q(m, 1_000_000)))
            .collect(),
        ppw_alwayson: q(17, 10_000_000),
    };
    let exact = build_metrics_table(&exact_inputs).unwrap();
    for (f, e) in float.cells().iter().zip(exact.cells()) {
        let as_f = |x: Exact| *x.numer() as f64 / *x.denom() as f64;
        assert!((f.p_avg - as_f(e.p_avg)).abs() < 1e-9);
        assert!((f.nppw - as_f(e.nppw)).abs() < 1e-9);
    }
    // 15-minute row, zero sleep power: 250 Wh over a quarter hour.
    assert_eq!(exact.cell(0, 0).p_avg, q(1000, 1));
    // Row anchor reproduces its own PPW exactly.
    for r in 0..exact.rows() {
        assert_eq!(exact.cell(r, 0).ppw, exact_inputs.latency[r].anchor());
    }
}

trait Anchor {
    fn anchor(&self) -> Exact;
}

impl Anchor for RowLatency<Exact> {
    fn anchor(&self) -> Exact {
        match *self {
            RowLatency::AnchorPpw(p) => p,
            RowLatency::Measured(_) => unreachable!(),
        }
    }
}

#[test]
fn sleep_power_columns_step_by_sleeping_count() {
    for &t in &reference::T_SETUPS_MIN {
        let a = p_avg_model(t, 28.0, 250.0, 10).unwrap();
        let b = p_avg_model(t, 56.0, 250.0, 10).unwrap();
        assert!((b - a - 280.0).abs() < 1e-9);
    }
}

#[test]
fn nearest_rank_percentile_on_a_hundred() {
    let v: Vec<f64> = (1..=100).map(f64::from).collect();
    assert_eq!(t95(&v).unwrap(), 95.0);
    assert_eq!(t95(&[7.0]).unwrap(), 7.0);
    assert!(t95::<f64>(&[]).is_err());
}

fn inputs_strategy() -> impl Strategy<Value = MetricsInputs> {
    (
        1u32..1000,
        0usize..20,
        proptest::collection::vec(1u32..60, 1..6),
        proptest::collection::vec(0u32..200, 1..6),
        1u32..100,
    )
        .prop_flat_map(|(e, n, ts, ps, ao)| {
            let rows = ts.len();
            proptest::collection::vec(1u32..2000, rows).prop_map(move |lat| MetricsInputs {
                energy: e as f64,
                n_sleeping: n,
                t_setups: ts.iter().map(|&t| t as f64).collect(),
                p_sleeps: ps.iter().map(|&p| p as f64).collect(),
                latency: lat.iter().map(|&l| RowLatency::Measured(l as f64)).collect(),
                ppw_alwayson: ao as f64 * 1e-7,
            })
        })
}

proptest! {
    #[test]
    fn nppw_orders_like_ppw(inputs in inputs_strategy()) {
        let table = build_metrics_table(&inputs).unwrap();
        let cells = table.cells();
        for a in cells {
            prop_assert!(a.p_avg > 0.0 && a.ppw > 0.0 && a.nppw > 0.0);
            for b in cells {
                prop_assert_eq!(a.ppw < b.ppw, a.nppw < b.nppw);
            }
        }
    }

    #[test]
    fn more_sleep_power_never_lowers_average_power(inputs in inputs_strategy()) {
        let table = build_metrics_table(&inputs).unwrap();
        for r in 0..table.rows() {
            for c in 0..table.cols() {
                for c2 in 0..table.cols() {
                    if table.p_sleeps[c] <= table.p_sleeps[c2] {
                        prop_assert!(table.cell(r, c).p_avg <= table.cell(r, c2).p_avg);
                    }
                }
            }
        }
    }
}
