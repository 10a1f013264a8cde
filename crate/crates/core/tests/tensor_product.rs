use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use o3tensor::harness::equivariance_report;
use o3tensor::linalg::rank;
use o3tensor::o3::rand_o3;
use o3tensor::tensor_product::{fully_connected, Instruction, Mode, TensorProductSpec, TensorProductDoc};
use o3tensor::{Irrep, Irreps, MulIrrep, Parity};

fn irreps(s: &str) -> Irreps {
    s.parse().unwrap()
}

/// `T` as a `dim_out × (dim1 · dim2)` matrix, from basis inputs.
fn as_matrix(tp: &TensorProductSpec, w: &[f64]) -> DMatrix<f64> {
    let (d1, d2) = (tp.irreps_in1().dim(), tp.irreps_in2().dim());
    let mut t = DMatrix::zeros(tp.irreps_out().dim(), d1 * d2);
    for i in 0..d1 {
        for j in 0..d2 {
            let (mut x, mut y) = (vec![0.0; d1], vec![0.0; d2]);
            x[i] = 1.0;
            y[j] = 1.0;
            let z = tp.evaluate(w, &x, &y).unwrap();
            t.set_column(i * d2 + j, &DVector::from_vec(z));
        }
    }
    t
}

/// Rows `(I ⊗ Kᵀ) − (D_out ⊗ I)` for a few random group elements: their
/// null space is every equivariant bilinear map, vectorized row-major.
fn commutation_system(a: &Irreps, b: &Irreps, o: &Irreps, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_in = a.dim() * b.dim();
    let n = o.dim() * n_in;
    let mut rows = Vec::new();
    for _ in 0..4 {
        let g = rand_o3(&mut rng);
        let k = a.d_matrix(&g).kronecker(&b.d_matrix(&g));
        let m = DMatrix::identity(o.dim(), o.dim()).kronecker(&k.transpose())
            - o.d_matrix(&g).kronecker(&DMatrix::identity(n_in, n_in));
        rows.push(m);
    }
    let mut out = DMatrix::zeros(rows.len() * n, n);
    for (r, m) in rows.iter().enumerate() {
        out.rows_mut(r * n, n).copy_from(m);
    }
    out
}

#[test]
fn fully_connected_spans_all_equivariant_maps() {
    for (a, b, o) in [
        ("0e+1o", "1o+1e", "0e+1e+1o+0o"),
        ("2x1o", "1o", "0e+2x1e+2e"),
        ("1e+2o", "1o+0e", "1o+2x2o+3o+1e"),
    ] {
        let (a, b, o) = (irreps(a), irreps(b), irreps(o));
        let tp = fully_connected(&a, &b, &o).unwrap();
        let system = commutation_system(&a, &b, &o, 5);
        let n = system.ncols();
        let oracle_dim = n - rank(&system, 1e-9);

        let cols: Vec<DVector<f64>> = (0..tp.weight_numel())
            .map(|k| {
                let mut w = vec![0.0; tp.weight_numel()];
                w[k] = 1.0;
                let t = as_matrix(&tp, &w);
                DVector::from_iterator(n, t.transpose().iter().copied())
            })
            .collect();
        let span = DMatrix::from_columns(&cols);
        assert!((&system * &span).amax() < 1e-10);
        assert_eq!(rank(&span, 1e-9), tp.weight_numel());
        assert_eq!(tp.weight_numel(), oracle_dim, "{a} x {b} -> {o}");
    }
}

#[test]
fn single_path_is_scaled_dot_product() {
    let tp = TensorProductSpec::new(irreps("1o"), irreps("1o"), irreps("0e"), vec![Instruction::new(0, 0, 0, Mode::Uvw, true)])
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = rng.random_range(-2.0..2.0);
        let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let z = tp.evaluate(&[w], &x, &y).unwrap();
        assert!((z[0] - w * dot / 3f64.sqrt()).abs() < 1e-14);
    }
}

#[test]
fn modes_have_expected_shapes() {
    let a = irreps("3x1o");
    let b = irreps("3x1e");
    for (mode, out, weights) in [
        (Mode::Uvw, "2x0o", 18),
        (Mode::Uvu, "3x0o", 9),
        (Mode::Uuu, "3x0o", 3),
        (Mode::Uvuv, "9x0o", 9),
    ] {
        let tp = TensorProductSpec::new(a.clone(), b.clone(), irreps(out), vec![Instruction::new(0, 0, 0, mode, true)])
            .unwrap();
        assert_eq!(tp.weight_numel(), weights, "{mode}");
        let w = vec![0.7; weights];
        let f = |x: &[Vec<f64>]| tp.evaluate(&w, &x[0], &x[1]);
        let r = equivariance_report(f, &[a.clone(), b.clone()], tp.irreps_out(), 6, 1).unwrap();
        assert!(r.max_residual < 1e-12);
    }
}

#[test]
fn json_spec_round_trip() {
    let text = r#"{
        "irreps_in1": "1o + 1o",
        "irreps_in2": "0e + 1o",
        "irreps_out": "0e + 1o",
        "instructions": [
            {"i_in1": 0, "i_in2": 1, "i_out": 0, "mode": "uvw"},
            {"i_in1": 1, "i_in2": 1, "i_out": 0, "mode": "uvw"},
            {"i_in1": 0, "i_in2": 0, "i_out": 1, "mode": "uvw"},
            {"i_in1": 1, "i_in2": 0, "i_out": 1, "mode": "uvw", "has_weight": true}
        ]
    }"#;
    let doc: TensorProductDoc = serde_json::from_str(text).unwrap();
    let tp = doc.build().unwrap();
    assert_eq!((tp.paths().len(), tp.weight_numel()), (4, 4));
    let again: TensorProductDoc = serde_json::from_str(&serde_json::to_string(&TensorProductDoc::from(&tp)).unwrap()).unwrap();
    let tp2 = again.build().unwrap();
    assert_eq!(tp2.instructions(), tp.instructions());
}

fn arb_irreps() -> impl Strategy<Value = Irreps> {
    prop::collection::vec((1usize..3, 0u32..3, any::<bool>()), 1..3).prop_map(|v| {
        Irreps::new(
            v.into_iter()
                .map(|(m, l, odd)| MulIrrep::new(m, Irrep::new(l, if odd { Parity::Odd } else { Parity::Even })))
                .collect(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_specs_are_equivariant_and_bilinear(a in arb_irreps(), b in arb_irreps(), seed in 0u64..1000) {
        let out: Irreps = Irreps::new(
            a.iter()
                .flat_map(|x| b.iter().flat_map(move |y| x.ir.selection_rule(y.ir)))
                .map(|ir| MulIrrep::new(1, ir))
                .collect(),
        )
        .simplified();
        let tp = fully_connected(&a, &b, &out).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..tp.weight_numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = |x: &[Vec<f64>]| tp.evaluate(&w, &x[0], &x[1]);
        let r = equivariance_report(f, &[a.clone(), b.clone()], &out, 4, seed).unwrap();
        prop_assert!(r.max_residual < 1e-10);

        let x: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..b.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z = tp.evaluate(&w, &x, &y).unwrap();
        let x3: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let z3 = tp.evaluate(&w, &x3, &y).unwrap();
        for (p, q) in z.iter().zip(&z3) {
            prop_assert!((3.0 * p - q).abs() < 1e-12);
        }
    }
}
