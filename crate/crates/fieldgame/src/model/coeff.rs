//! General coefficient functions and the assembled problem description.
//!
//! All dynamic coefficients share one argument list,
//!
//! ```text
//! (t, x, E[x], u1, E[u1], u2, E[u2]),
//! ```
//!
//! where the drift `b` and the diffusions `g` (against the state noise W)
//! and `g~` (against the observation noise Y) are R^n-valued while the
//! observation drift `h` and the running cost `l` are scalar; the terminal
//! cost `m` takes `(x, E[x])`. Mean-field arguments enter as plain vectors
//! because every law downstream is approximated by a particle-ensemble
//! mean.
//!
//! A coefficient is a closure plus optional analytic derivative closures.
//! The built-in families (constant, linear, bilinear, quadratic, and the
//! bounded-smooth tanh/sin test functions) supply their derivatives
//! automatically and are exactly what the JSON problem format can express;
//! `from_fn` is the escape hatch for programmatic use.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView};

/// Argument blocks a coefficient can be differentiated against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArgBlock {
    X,
    XMean,
    U1,
    U1Mean,
    U2,
    U2Mean,
}

impl ArgBlock {
    pub const ALL: [ArgBlock; 6] = [
        ArgBlock::X,
        ArgBlock::XMean,
        ArgBlock::U1,
        ArgBlock::U1Mean,
        ArgBlock::U2,
        ArgBlock::U2Mean,
    ];

    /// Dimension of the block given the state and control dimensions.
    pub fn dim(self, n: usize, k1: usize, k2: usize) -> usize {
        match self {
            ArgBlock::X | ArgBlock::XMean => n,
            ArgBlock::U1 | ArgBlock::U1Mean => k1,
            ArgBlock::U2 | ArgBlock::U2Mean => k2,
        }
    }

    /// Key used by the JSON problem format.
    pub fn key(self) -> &'static str {
        match self {
            ArgBlock::X => "x",
            ArgBlock::XMean => "x_mean",
            ArgBlock::U1 => "u1",
            ArgBlock::U1Mean => "u1_mean",
            ArgBlock::U2 => "u2",
            ArgBlock::U2Mean => "u2_mean",
        }
    }
}

impl fmt::Display for ArgBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArgBlock::X => "x",
            ArgBlock::XMean => "E[x]",
            ArgBlock::U1 => "u1",
            ArgBlock::U1Mean => "E[u1]",
            ArgBlock::U2 => "u2",
            ArgBlock::U2Mean => "E[u2]",
        })
    }
}

/// Borrowed evaluation point for the dynamic coefficients.
#[derive(Clone, Copy)]
pub struct CoeffArgs<'a> {
    pub t: f64,
    pub x: DVectorView<'a, f64>,
    pub x_mean: DVectorView<'a, f64>,
    pub u1: DVectorView<'a, f64>,
    pub u1_mean: DVectorView<'a, f64>,
    pub u2: DVectorView<'a, f64>,
    pub u2_mean: DVectorView<'a, f64>,
}

impl<'a> CoeffArgs<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn from_slices(
        t: f64,
        x: &'a [f64],
        x_mean: &'a [f64],
        u1: &'a [f64],
        u1_mean: &'a [f64],
        u2: &'a [f64],
        u2_mean: &'a [f64],
    ) -> Self {
        CoeffArgs {
            t,
            x: DVectorView::from_slice(x, x.len()),
            x_mean: DVectorView::from_slice(x_mean, x_mean.len()),
            u1: DVectorView::from_slice(u1, u1.len()),
            u1_mean: DVectorView::from_slice(u1_mean, u1_mean.len()),
            u2: DVectorView::from_slice(u2, u2.len()),
            u2_mean: DVectorView::from_slice(u2_mean, u2_mean.len()),
        }
    }

    pub fn block(&self, block: ArgBlock) -> DVectorView<'a, f64> {
        match block {
            ArgBlock::X => self.x,
            ArgBlock::XMean => self.x_mean,
            ArgBlock::U1 => self.u1,
            ArgBlock::U1Mean => self.u1_mean,
            ArgBlock::U2 => self.u2,
            ArgBlock::U2Mean => self.u2_mean,
        }
    }
}

/// Owned evaluation point; the form used for sampling and finite
/// differencing, convertible to [`CoeffArgs`] by borrowing.
#[derive(Clone, Debug, PartialEq)]
pub struct ArgPoint {
    pub t: f64,
    pub x: DVector<f64>,
    pub x_mean: DVector<f64>,
    pub u1: DVector<f64>,
    pub u1_mean: DVector<f64>,
    pub u2: DVector<f64>,
    pub u2_mean: DVector<f64>,
}

impl ArgPoint {
    pub fn zeros(n: usize, k1: usize, k2: usize, t: f64) -> Self {
        ArgPoint {
            t,
            x: DVector::zeros(n),
            x_mean: DVector::zeros(n),
            u1: DVector::zeros(k1),
            u1_mean: DVector::zeros(k1),
            u2: DVector::zeros(k2),
            u2_mean: DVector::zeros(k2),
        }
    }

    pub fn args(&self) -> CoeffArgs<'_> {
        CoeffArgs::from_slices(
            self.t,
            self.x.as_slice(),
            self.x_mean.as_slice(),
            self.u1.as_slice(),
            self.u1_mean.as_slice(),
            self.u2.as_slice(),
            self.u2_mean.as_slice(),
        )
    }

    pub fn block_mut(&mut self, block: ArgBlock) -> &mut DVector<f64> {
        match block {
            ArgBlock::X => &mut self.x,
            ArgBlock::XMean => &mut self.x_mean,
            ArgBlock::U1 => &mut self.u1,
            ArgBlock::U1Mean => &mut self.u1_mean,
            ArgBlock::U2 => &mut self.u2,
            ArgBlock::U2Mean => &mut self.u2_mean,
        }
    }

    pub fn block_ref(&self, block: ArgBlock) -> &DVector<f64> {
        match block {
            ArgBlock::X => &self.x,
            ArgBlock::XMean => &self.x_mean,
            ArgBlock::U1 => &self.u1,
            ArgBlock::U1Mean => &self.u1_mean,
            ArgBlock::U2 => &self.u2,
            ArgBlock::U2Mean => &self.u2_mean,
        }
    }
}

type VecEval = Arc<dyn Fn(&CoeffArgs<'_>) -> DVector<f64> + Send + Sync>;
type VecJac = Arc<dyn Fn(&CoeffArgs<'_>, ArgBlock) -> DMatrix<f64> + Send + Sync>;
type ScalEval = Arc<dyn Fn(&CoeffArgs<'_>) -> f64 + Send + Sync>;
type ScalGrad = Arc<dyn Fn(&CoeffArgs<'_>, ArgBlock) -> DVector<f64> + Send + Sync>;

/// R^n-valued coefficient (drift or diffusion) with optional analytic
/// Jacobians per argument block.
#[derive(Clone)]
pub struct VectorCoeff {
    dim: usize,
    value: VecEval,
    jacobian: Option<VecJac>,
}

impl std::fmt::Debug for VectorCoeff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorCoeff")
            .field("dim", &self.dim)
            .field("has_jacobian", &self.jacobian.is_some())
            .finish_non_exhaustive()
    }
}

impl VectorCoeff {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, args: &CoeffArgs<'_>) -> DVector<f64> {
        (self.value)(args)
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Analytic Jacobian with respect to one argument block
    /// (`dim × block-dim`), if supplied.
    pub fn jacobian(&self, args: &CoeffArgs<'_>, block: ArgBlock) -> Option<DMatrix<f64>> {
        self.jacobian.as_ref().map(|j| j(args, block))
    }

    pub fn from_fn(dim: usize, value: impl Fn(&CoeffArgs<'_>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        VectorCoeff { dim, value: Arc::new(value), jacobian: None }
    }

    pub fn with_jacobian(
        dim: usize,
        value: impl Fn(&CoeffArgs<'_>) -> DVector<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&CoeffArgs<'_>, ArgBlock) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        VectorCoeff { dim, value: Arc::new(value), jacobian: Some(Arc::new(jacobian)) }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(DVector::zeros(dim))
    }

    pub fn constant(v: DVector<f64>) -> Self {
        let dim = v.len();
        Self::with_jacobian(
            dim,
            move |_| v.clone(),
            move |args, block| DMatrix::zeros(dim, args.block(block).len()),
        )
    }

    /// Sum of linear maps: value = Σ M_β · arg_β over the given terms.
    pub fn linear(dim: usize, terms: Vec<(ArgBlock, DMatrix<f64>)>) -> Self {
        let terms = Arc::new(terms);
        let terms2 = terms.clone();
        Self::with_jacobian(
            dim,
            move |args| {
                let mut acc = DVector::zeros(dim);
                for (b, m) in terms.iter() {
                    let v = args.block(*b);
                    acc.gemv(1.0, m, &v, 1.0);
                }
                acc
            },
            move |args, block| {
                let mut acc = DMatrix::zeros(dim, args.block(block).len());
                for (b, m) in terms2.iter() {
                    if *b == block {
                        acc += m;
                    }
                }
                acc
            },
        )
    }

    /// Bounded-smooth test family: value_i = amp_i · tanh(z_i + off_i)
    /// with z = Σ M_β · arg_β.
    pub fn tanh_of_linear(
        amplitude: DVector<f64>,
        offset: DVector<f64>,
        terms: Vec<(ArgBlock, DMatrix<f64>)>,
    ) -> Self {
        let dim = amplitude.len();
        assert_eq!(offset.len(), dim, "tanh family: amplitude/offset length mismatch");
        let terms = Arc::new(terms);
        let inner = {
            let terms = terms.clone();
            let offset = offset.clone();
            move |args: &CoeffArgs<'_>| {
                let mut z = offset.clone();
                for (b, m) in terms.iter() {
                    z += m * args.block(*b);
                }
                z
            }
        };
        let inner2 = inner.clone();
        let amp = amplitude.clone();
        Self::with_jacobian(
            dim,
            move |args| inner(args).map_with_location(|i, _, z| amplitude[i] * z.tanh()),
            move |args, block| {
                let z = inner2(args);
                let mut acc = DMatrix::zeros(dim, args.block(block).len());
                for (b, m) in terms.iter() {
                    if *b == block {
                        acc += m;
                    }
                }
                // d/dz amp·tanh(z) = amp·sech²(z), applied row-wise
                for i in 0..dim {
                    let scale = amp[i] * (1.0 - z[i].tanh().powi(2));
                    for j in 0..acc.ncols() {
                        acc[(i, j)] *= scale;
                    }
                }
                acc
            },
        )
    }
}

/// Scalar coefficient (observation drift or running cost) with optional
/// analytic gradients per argument block.
#[derive(Clone)]
pub struct ScalarCoeff {
    value: ScalEval,
    gradient: Option<ScalGrad>,
}

impl std::fmt::Debug for ScalarCoeff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarCoeff")
            .field("has_gradient", &self.gradient.is_some())
            .finish_non_exhaustive()
    }
}

impl ScalarCoeff {
    pub fn eval(&self, args: &CoeffArgs<'_>) -> f64 {
        (self.value)(args)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn gradient(&self, args: &CoeffArgs<'_>, block: ArgBlock) -> Option<DVector<f64>> {
        self.gradient.as_ref().map(|g| g(args, block))
    }

    pub fn from_fn(value: impl Fn(&CoeffArgs<'_>) -> f64 + Send + Sync + 'static) -> Self {
        ScalarCoeff { value: Arc::new(value), gradient: None }
    }

    pub fn with_gradient(
        value: impl Fn(&CoeffArgs<'_>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&CoeffArgs<'_>, ArgBlock) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        ScalarCoeff { value: Arc::new(value), gradient: Some(Arc::new(gradient)) }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::with_gradient(move |_| c, |args, block| DVector::zeros(args.block(block).len()))
    }

    /// value = offset + Σ ⟨w_β, arg_β⟩.
    pub fn linear(offset: f64, terms: Vec<(ArgBlock, DVector<f64>)>) -> Self {
        let terms = Arc::new(terms);
        let terms2 = terms.clone();
        Self::with_gradient(
            move |args| {
                offset + terms.iter().map(|(b, w)| w.dot(&args.block(*b))).sum::<f64>()
            },
            move |args, block| {
                let mut acc = DVector::zeros(args.block(block).len());
                for (b, w) in terms2.iter() {
                    if *b == block {
                        acc += w;
                    }
                }
                acc
            },
        )
    }

    /// value = Σ ⟨N_β arg_β, arg_β⟩ + Σ ⟨w_β, arg_β⟩ + offset.
    pub fn quadratic(
        quadratic: Vec<(ArgBlock, DMatrix<f64>)>,
        linear: Vec<(ArgBlock, DVector<f64>)>,
        offset: f64,
    ) -> Self {
        let quad = Arc::new(quadratic);
        let lin = Arc::new(linear);
        let quad2 = quad.clone();
        let lin2 = lin.clone();
        Self::with_gradient(
            move |args| {
                let mut v = offset;
                for (b, nm) in quad.iter() {
                    let a = args.block(*b);
                    v += (nm * a).dot(&a);
                }
                for (b, w) in lin.iter() {
                    v += w.dot(&args.block(*b));
                }
                v
            },
            move |args, block| {
                let mut acc = DVector::zeros(args.block(block).len());
                for (b, nm) in quad2.iter() {
                    if *b == block {
                        let a = args.block(*b);
                        acc += nm * a + nm.transpose() * a;
                    }
                }
                for (b, w) in lin2.iter() {
                    if *b == block {
                        acc += w;
                    }
                }
                acc
            },
        )
    }

    /// value = ⟨arg_left, M · arg_right⟩.
    pub fn bilinear(left: ArgBlock, right: ArgBlock, m: DMatrix<f64>) -> Self {
        let m2 = m.clone();
        Self::with_gradient(
            move |args| args.block(left).dot(&(&m * args.block(right))),
            move |args, block| {
                let mut acc = DVector::zeros(args.block(block).len());
                if block == left {
                    acc += &m2 * args.block(right);
                }
                if block == right {
                    acc += m2.transpose() * args.block(left);
                }
                acc
            },
        )
    }

    /// Bounded-smooth test family: amp · sin(Σ ⟨w_β, arg_β⟩ + phase).
    pub fn sin_of_linear(amplitude: f64, phase: f64, terms: Vec<(ArgBlock, DVector<f64>)>) -> Self {
        let terms = Arc::new(terms);
        let terms2 = terms.clone();
        let z = move |args: &CoeffArgs<'_>| {
            phase + terms.iter().map(|(b, w)| w.dot(&args.block(*b))).sum::<f64>()
        };
        let z2 = z.clone();
        Self::with_gradient(
            move |args| amplitude * z(args).sin(),
            move |args, block| {
                let scale = amplitude * z2(args).cos();
                let mut acc = DVector::zeros(args.block(block).len());
                for (b, w) in terms2.iter() {
                    if *b == block {
                        acc += w * scale;
                    }
                }
                acc
            },
        )
    }
}

/// Borrowed evaluation point for the terminal cost.
#[derive(Clone, Copy)]
pub struct TerminalArgs<'a> {
    pub x: DVectorView<'a, f64>,
    pub x_mean: DVectorView<'a, f64>,
}

impl<'a> TerminalArgs<'a> {
    pub fn from_slices(x: &'a [f64], x_mean: &'a [f64]) -> Self {
        TerminalArgs {
            x: DVectorView::from_slice(x, x.len()),
            x_mean: DVectorView::from_slice(x_mean, x_mean.len()),
        }
    }
}

type TermEval = Arc<dyn Fn(&TerminalArgs<'_>) -> f64 + Send + Sync>;
type TermGrad = Arc<dyn Fn(&TerminalArgs<'_>) -> DVector<f64> + Send + Sync>;

/// Terminal cost m(x, E[x]) with optional analytic gradients m_x, m_y.
#[derive(Clone)]
pub struct TerminalCost {
    value: TermEval,
    grad_x: Option<TermGrad>,
    grad_x_mean: Option<TermGrad>,
}

impl std::fmt::Debug for TerminalCost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TerminalCost")
            .field("has_gradients", &(self.grad_x.is_some() && self.grad_x_mean.is_some()))
            .finish_non_exhaustive()
    }
}

impl TerminalCost {
    pub fn eval(&self, args: &TerminalArgs<'_>) -> f64 {
        (self.value)(args)
    }

    pub fn has_gradients(&self) -> bool {
        self.grad_x.is_some() && self.grad_x_mean.is_some()
    }

    pub fn grad_x(&self, args: &TerminalArgs<'_>) -> Option<DVector<f64>> {
        self.grad_x.as_ref().map(|g| g(args))
    }

    pub fn grad_x_mean(&self, args: &TerminalArgs<'_>) -> Option<DVector<f64>> {
        self.grad_x_mean.as_ref().map(|g| g(args))
    }

    pub fn from_fn(value: impl Fn(&TerminalArgs<'_>) -> f64 + Send + Sync + 'static) -> Self {
        TerminalCost { value: Arc::new(value), grad_x: None, grad_x_mean: None }
    }

    pub fn with_gradients(
        value: impl Fn(&TerminalArgs<'_>) -> f64 + Send + Sync + 'static,
        grad_x: impl Fn(&TerminalArgs<'_>) -> DVector<f64> + Send + Sync + 'static,
        grad_x_mean: impl Fn(&TerminalArgs<'_>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        TerminalCost {
            value: Arc::new(value),
            grad_x: Some(Arc::new(grad_x)),
            grad_x_mean: Some(Arc::new(grad_x_mean)),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::linear(DVector::zeros(n), DVector::zeros(n))
    }

    pub fn constant(c: f64, n: usize) -> Self {
        Self::with_gradients(
            move |_| c,
            move |_| DVector::zeros(n),
            move |_| DVector::zeros(n),
        )
    }

    /// m = ⟨mx, x⟩ + ⟨my, E[x]⟩.
    pub fn linear(mx: DVector<f64>, my: DVector<f64>) -> Self {
        let gx = mx.clone();
        let gy = my.clone();
        Self::with_gradients(
            move |args| mx.dot(&args.x) + my.dot(&args.x_mean),
            move |_| gx.clone(),
            move |_| gy.clone(),
        )
    }

    /// m = ⟨Mxx x, x⟩ + ⟨Myy E[x], E[x]⟩ (convex when both are PSD).
    pub fn quadratic(mxx: DMatrix<f64>, myy: DMatrix<f64>) -> Self {
        let ax = mxx.clone();
        let by = myy.clone();
        Self::with_gradients(
            move |args| (&mxx * args.x).dot(&args.x) + (&myy * args.x_mean).dot(&args.x_mean),
            move |args| &ax * args.x + ax.transpose() * args.x,
            move |args| &by * args.x_mean + by.transpose() * args.x_mean,
        )
    }
}

/// Componentwise box bounds on a control set, optional metadata consumed
/// only by the variational-inequality form of the stationarity check.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxBounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl BoxBounds {
    /// Euclidean projection onto the box.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        v.map_with_location(|i, _, vi| vi.clamp(self.lower[i], self.upper[i]))
    }
}

/// Complete description of one game: dimensions, horizon, initial state,
/// and the six coefficient functions.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    /// Horizon T of the play interval [0, T].
    pub horizon: f64,
    /// Initial state a.
    pub initial: DVector<f64>,
    pub drift_b: VectorCoeff,
    pub diffusion_g: VectorCoeff,
    pub diffusion_g_tilde: VectorCoeff,
    pub observation_h: ScalarCoeff,
    pub running_cost: ScalarCoeff,
    pub terminal_cost: TerminalCost,
    /// Optional box constraints per player (players default to the full
    /// Euclidean control space).
    pub control_bounds: [Option<BoxBounds>; 2],
}

impl ProblemSpec {
    /// Problem with all coefficients identically zero; a convenient base
    /// to customize field by field.
    pub fn zeros(n: usize, k1: usize, k2: usize, horizon: f64, initial: DVector<f64>) -> Self {
        ProblemSpec {
            n,
            k1,
            k2,
            horizon,
            initial,
            drift_b: VectorCoeff::zero(n),
            diffusion_g: VectorCoeff::zero(n),
            diffusion_g_tilde: VectorCoeff::zero(n),
            observation_h: ScalarCoeff::zero(),
            running_cost: ScalarCoeff::zero(),
            terminal_cost: TerminalCost::zero(n),
            control_bounds: [None, None],
        }
    }

    /// Dimension of one argument block.
    pub fn block_dim(&self, block: ArgBlock) -> usize {
        block.dim(self.n, self.k1, self.k2)
    }
}
