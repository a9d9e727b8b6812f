//! Globally adaptive Gauss–Kronrod (7/15) quadrature for scalar and
//! vector-valued integrands.

/// Kronrod abscissae on [-1, 1], descending; odd indices are the Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Maximum number of subintervals kept at once.
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn abs(abs: f64) -> Tolerance {
        Tolerance { abs, rel: 0.0, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: Vec<f64>,
    pub error: f64,
    pub evaluations: usize,
    /// False when the interval cap was hit before the tolerance was met.
    pub converged: bool,
}

struct Piece {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

fn kronrod<F, E>(f: &mut F, a: f64, b: f64, dim: usize) -> Result<(Vec<f64>, f64), E>
where
    F: FnMut(f64) -> Result<Vec<f64>, E>,
{
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    for i in 0..8 {
        let nodes: &[f64] = if XGK[i] == 0.0 { &[0.0] } else { &[-XGK[i], XGK[i]] };
        for &x in nodes {
            let y = f(c + r * x)?;
            for d in 0..dim {
                k[d] += WGK[i] * y[d];
                if i % 2 == 1 {
                    g[d] += WG[i / 2] * y[d];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for d in 0..dim {
        k[d] *= r;
        g[d] *= r;
        err = err.max((k[d] - g[d]).abs());
    }
    Ok((k, err))
}

/// Integrates a vector-valued function over each `[breaks[i], breaks[i+1]]`
/// and sums. Breakpoints let callers split at known peaks or kinks.
pub fn integrate_vec<F, E>(mut f: F, breaks: &[f64], dim: usize, tol: Tolerance) -> Result<Estimate, E>
where
    F: FnMut(f64) -> Result<Vec<f64>, E>,
{
    let mut pieces = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, error) = kronrod(&mut f, w[0], w[1], dim)?;
            pieces.push(Piece { a: w[0], b: w[1], value, error });
        }
    }
    let mut evaluations = 15 * pieces.len();
    let total = |pieces: &[Piece]| -> (Vec<f64>, f64) {
        let mut v = vec![0.0; dim];
        let mut e = 0.0;
        for p in pieces {
            for d in 0..dim {
                v[d] += p.value[d];
            }
            e += p.error;
        }
        (v, e)
    };
    loop {
        let (value, error) = total(&pieces);
        let scale = value.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if error <= tol.abs.max(tol.rel * scale) {
            return Ok(Estimate { value, error, evaluations, converged: true });
        }
        if pieces.len() >= tol.max_intervals {
            return Ok(Estimate { value, error, evaluations, converged: false });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one piece");
        let p = pieces.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) {
            // Interval collapsed to adjacent floats; nothing left to refine.
            pieces.push(Piece { error: 0.0, ..p });
            continue;
        }
        let (lv, le) = kronrod(&mut f, p.a, m, dim)?;
        let (rv, re) = kronrod(&mut f, m, p.b, dim)?;
        evaluations += 30;
        pieces.push(Piece { a: p.a, b: m, value: lv, error: le });
        pieces.push(Piece { a: m, b: p.b, value: rv, error: re });
    }
}

/// Scalar convenience wrapper.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: Tolerance) -> Estimate {
    match integrate_vec::<_, std::convert::Infallible>(|x| Ok(vec![f(x)]), breaks, 1, tol) {
        Ok(e) => e,
        Err(never) => match never {},
    }
}
