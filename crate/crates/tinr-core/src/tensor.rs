//! Dense matrices and a reverse-mode tape for training fully connected nets.
//!
//! Training arithmetic is 64-bit throughout; only serialized weights are
//! 32-bit. The tape records affine and activation steps in forward order
//! together with the cached values the backward pass needs, then replays them
//! in exact reverse. One tape per forward pass; no shared mutable state.

use crate::error::{Error, Result};

/// Row-major dense matrix. For batched data the batch is the leading (row)
/// dimension; weight matrices are `d_in x d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{rows}x{cols}"),
                format!("data len {}", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds from nested rows; handy in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Takes rows `[start, end)` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        assert!(start <= end && end <= self.rows);
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dense vector; houses layer biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector { data: vec![0.0; len] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Elementwise nonlinearity applied after an affine step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    /// `sin(omega0 * x)`.
    Sine { omega0: f64 },
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sine { omega0 } => (omega0 * x).sin(),
            Activation::Identity => x,
        }
    }

    // Derivative at the pre-activation value. ReLU subgradient at 0 is 0.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sine { omega0 } => omega0 * (omega0 * x).cos(),
            Activation::Identity => 1.0,
        }
    }
}

/// `input * w + b` broadcast over rows, without recording. `w` is
/// `d_in x d_out`, `input` is `batch x d_in`.
pub fn affine(w: &Matrix, b: &Vector, input: &Matrix) -> Result<Matrix> {
    if input.cols != w.rows {
        return Err(Error::shape(
            "affine input/weight",
            format!("input {}x{}", input.rows, input.cols),
            format!("weight {}x{}", w.rows, w.cols),
        ));
    }
    if b.len() != w.cols {
        return Err(Error::shape(
            "affine bias/weight",
            format!("bias len {}", b.len()),
            format!("weight {}x{}", w.rows, w.cols),
        ));
    }
    let (batch, d_in, d_out) = (input.rows, w.rows, w.cols);
    let mut out = Matrix::zeros(batch, d_out);
    for i in 0..batch {
        let orow = &mut out.data[i * d_out..(i + 1) * d_out];
        orow.copy_from_slice(&b.data);
        let irow = &input.data[i * d_in..(i + 1) * d_in];
        for (k, &a) in irow.iter().enumerate() {
            let wrow = &w.data[k * d_out..(k + 1) * d_out];
            for (o, &wv) in orow.iter_mut().zip(wrow) {
                *o += a * wv;
            }
        }
    }
    Ok(out)
}

/// Elementwise activation without recording.
pub fn activate(kind: Activation, x: &Matrix) -> Matrix {
    let data = x.data.iter().map(|&v| kind.apply(v)).collect();
    Matrix {
        rows: x.rows,
        cols: x.cols,
        data,
    }
}

enum Step {
    Affine {
        // Caches of everything the backward pass needs.
        weight: Matrix,
        input: Matrix,
    },
    Activation {
        kind: Activation,
        pre: Matrix,
    },
}

/// Gradients for one affine layer, in the same shape as its parameters.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weight: Matrix,
    pub bias: Vector,
}

/// Everything `backward` produces: per-layer parameter gradients (in forward
/// layer order) plus the gradient with respect to the very first input, which
/// encoders with trainable tables consume.
#[derive(Debug)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
    pub input: Matrix,
}

/// Ordered record of one forward pass.
#[derive(Default)]
pub struct Tape {
    steps: Vec<Step>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Affine step: records the cached input and weight, returns
    /// `input * w + b`.
    pub fn affine_forward(&mut self, w: &Matrix, b: &Vector, input: &Matrix) -> Result<Matrix> {
        let out = affine(w, b, input)?;
        self.steps.push(Step::Affine {
            weight: w.clone(),
            input: input.clone(),
        });
        Ok(out)
    }

    /// Activation step: records the pre-activation values.
    pub fn activation_forward(&mut self, kind: Activation, x: &Matrix) -> Matrix {
        let out = activate(kind, x);
        self.steps.push(Step::Activation {
            kind,
            pre: x.clone(),
        });
        out
    }

    /// Replays the tape in reverse, seeding with `loss_grad` (the gradient of
    /// the loss with respect to the final output). Consumes the recorded steps.
    pub fn backward(&mut self, loss_grad: &Matrix) -> Result<Gradients> {
        if self.steps.is_empty() {
            return Err(Error::State("backward called before any forward step"));
        }
        let mut grad = loss_grad.clone();
        let mut layers_rev: Vec<LayerGrads> = Vec::new();

        for step in self.steps.drain(..).rev() {
            match step {
                Step::Activation { kind, pre } => {
                    if grad.shape() != pre.shape() {
                        return Err(Error::shape(
                            "backward activation",
                            format!("grad {}x{}", grad.rows, grad.cols),
                            format!("pre {}x{}", pre.rows, pre.cols),
                        ));
                    }
                    for (g, &x) in grad.data.iter_mut().zip(&pre.data) {
                        *g *= kind.derivative(x);
                    }
                }
                Step::Affine { weight, input } => {
                    let (batch, d_in, d_out) = (input.rows, weight.rows, weight.cols);
                    if grad.shape() != (batch, d_out) {
                        return Err(Error::shape(
                            "backward affine",
                            format!("grad {}x{}", grad.rows, grad.cols),
                            format!("expected {batch}x{d_out}"),
                        ));
                    }
                    // dW = input^T * g, zero-initialized then accumulated.
                    let mut dw = Matrix::zeros(d_in, d_out);
                    let mut db = Vector::zeros(d_out);
                    for i in 0..batch {
                        let grow = &grad.data[i * d_out..(i + 1) * d_out];
                        let irow = &input.data[i * d_in..(i + 1) * d_in];
                        for (k, &a) in irow.iter().enumerate() {
                            let dwrow = &mut dw.data[k * d_out..(k + 1) * d_out];
                            for (d, &g) in dwrow.iter_mut().zip(grow) {
                                *d += a * g;
                            }
                        }
                        for (d, &g) in db.data.iter_mut().zip(grow) {
                            *d += g;
                        }
                    }
                    // d_input = g * W^T
                    let mut dinput = Matrix::zeros(batch, d_in);
                    for i in 0..batch {
                        let grow = &grad.data[i * d_out..(i + 1) * d_out];
                        let drow = &mut dinput.data[i * d_in..(i + 1) * d_in];
                        for (k, d) in drow.iter_mut().enumerate() {
                            let wrow = &weight.data[k * d_out..(k + 1) * d_out];
                            let mut s = 0.0;
                            for (&g, &wv) in grow.iter().zip(wrow) {
                                s += g * wv;
                            }
                            *d = s;
                        }
                    }
                    layers_rev.push(LayerGrads {
                        weight: dw,
                        bias: db,
                    });
                    grad = dinput;
                }
            }
        }

        layers_rev.reverse();
        Ok(Gradients {
            layers: layers_rev,
            input: grad,
        })
    }
}
