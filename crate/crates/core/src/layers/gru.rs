use rand::Rng;

use super::glorot;
use crate::autodiff::{Tape, Tensor, TensorError, Var};

/// Update (`z`), reset (`r`) and candidate (`h`) gate weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub w_z: T,
    pub w_r: T,
    pub w_h: T,
    pub u_z: T,
    pub u_r: T,
    pub u_h: T,
    pub b_z: T,
    pub b_r: T,
    pub b_h: T,
}

impl<T> GruParams<T> {
    pub const NAMES: [&'static str; 9] = ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"];

    pub fn fields(&self) -> [&T; 9] {
        [
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z, &self.b_r, &self.b_h,
        ]
    }

    pub fn from_fields(f: [T; 9]) -> Self {
        let [w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h] = f;
        Self {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z,
            b_r,
            b_h,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> GruParams<U> {
        GruParams::from_fields(self.fields().map(&mut f))
    }
}

impl GruParams<Tensor> {
    pub fn init(rng: &mut impl Rng, input_dim: usize, hidden_dim: usize) -> Self {
        let w_z = glorot(rng, input_dim, hidden_dim);
        let w_r = glorot(rng, input_dim, hidden_dim);
        let w_h = glorot(rng, input_dim, hidden_dim);
        let u_z = glorot(rng, hidden_dim, hidden_dim);
        let u_r = glorot(rng, hidden_dim, hidden_dim);
        let u_h = glorot(rng, hidden_dim, hidden_dim);
        let zero = Tensor::zeros(&[hidden_dim]);
        Self {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z: zero.clone(),
            b_r: zero.clone(),
            b_h: zero,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = Tensor::zeros(&[input_dim, hidden_dim]);
        let u = Tensor::zeros(&[hidden_dim, hidden_dim]);
        let b = Tensor::zeros(&[hidden_dim]);
        Self::from_fields([w.clone(), w.clone(), w, u.clone(), u.clone(), u, b.clone(), b.clone(), b])
    }

    pub fn register(&self, tape: &mut Tape) -> GruParams<Var> {
        self.map(|t| tape.leaf(t.clone()))
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.shape()[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.shape()[1]
    }
}

fn check_width(tape: &Tape, what: Var, expected: Var, expected_axis: usize) -> Result<(), TensorError> {
    let got = tape.value(what).cols();
    let want = tape.shape(expected)[expected_axis];
    if got == want {
        Ok(())
    } else {
        Err(TensorError::ShapeMismatch {
            op: "gru",
            left: tape.shape(what).to_vec(),
            right: tape.shape(expected).to_vec(),
        })
    }
}

/// One recurrence given the input projections `x·W + b` for each gate.
fn step(tape: &mut Tape, xz: Var, xr: Var, xh: Var, h: Var, p: &GruParams<Var>) -> Result<Var, TensorError> {
    let hz = tape.matmul(h, p.u_z)?;
    let z = tape.add(xz, hz)?;
    let z = tape.sigmoid(z)?;
    let hr = tape.matmul(h, p.u_r)?;
    let r = tape.add(xr, hr)?;
    let r = tape.sigmoid(r)?;
    let rh = tape.mul(r, h)?;
    let rh = tape.matmul(rh, p.u_h)?;
    let cand = tape.add(xh, rh)?;
    let cand = tape.tanh(cand)?;
    // (1 - z)·h + z·cand == h + z·(cand - h)
    let delta = tape.sub(cand, h)?;
    let delta = tape.mul(z, delta)?;
    tape.add(h, delta)
}

fn project(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
    let y = tape.matmul(x, w)?;
    tape.add_row(y, b)
}

/// Runs the GRU over the rows of `x` (`L×d`) from `h0` (`1×u`).
///
/// Returns every hidden state stacked as `L×u` and the final state `1×u`.
pub fn gru_forward(tape: &mut Tape, x: Var, h0: Var, p: &GruParams<Var>) -> Result<(Var, Var), TensorError> {
    check_width(tape, x, p.w_z, 0)?;
    check_width(tape, h0, p.u_z, 0)?;
    if tape.value(h0).rows() != 1 {
        return Err(TensorError::ShapeMismatch {
            op: "gru",
            left: tape.shape(h0).to_vec(),
            right: tape.shape(p.u_z).to_vec(),
        });
    }
    let len = tape.value(x).rows();
    let u = tape.shape(p.u_z)[0];
    let xz = project(tape, x, p.w_z, p.b_z)?;
    let xr = project(tape, x, p.w_r, p.b_r)?;
    let xh = project(tape, x, p.w_h, p.b_h)?;
    let mut h = tape.reshape(h0, &[1, u])?;
    let mut states = Vec::with_capacity(len);
    for t in 0..len {
        let gz = tape.gather_rows(xz, &[t])?;
        let gr = tape.gather_rows(xr, &[t])?;
        let gh = tape.gather_rows(xh, &[t])?;
        h = step(tape, gz, gr, gh, h, p)?;
        states.push(h);
    }
    let flat = tape.concat(&states)?;
    let outputs = tape.reshape(flat, &[len, u])?;
    Ok((outputs, h))
}

/// Batched recurrence: `inputs[t]` is `B×d`, `h0` is `B×u`. Returns the
/// `B×u` state after every step.
pub fn gru_sequence(tape: &mut Tape, inputs: &[Var], h0: Var, p: &GruParams<Var>) -> Result<Vec<Var>, TensorError> {
    check_width(tape, h0, p.u_z, 0)?;
    let mut h = h0;
    let mut states = Vec::with_capacity(inputs.len());
    for &x in inputs {
        check_width(tape, x, p.w_z, 0)?;
        let xz = project(tape, x, p.w_z, p.b_z)?;
        let xr = project(tape, x, p.w_r, p.b_r)?;
        let xh = project(tape, x, p.w_h, p.b_h)?;
        h = step(tape, xz, xr, xh, h, p)?;
        states.push(h);
    }
    Ok(states)
}
