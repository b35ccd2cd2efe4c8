//! LSTM layer with peephole connections.
//!
//! ```text
//! i_t = σ(W_xi x_t + W_hi h_{t-1} + W_ci c_{t-1} + b_i)
//! f_t = σ(W_xf x_t + W_hf h_{t-1} + W_cf c_{t-1} + b_f)
//! c_t = f_t ∘ c_{t-1} + i_t ∘ tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! o_t = σ(W_xo x_t + W_ho h_{t-1} + W_co c_t + b_o)
//! h_t = o_t ∘ tanh(c_t)
//! ```

use ndarray::{Array1, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};

use super::params::{ParamLayout, Slot};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub inputs: usize,
    pub hidden: usize,
    w: Weights,
}

#[derive(Debug, Clone, PartialEq)]
struct Weights {
    xi: Slot,
    hi: Slot,
    ci: Slot,
    xf: Slot,
    hf: Slot,
    cf: Slot,
    xc: Slot,
    hc: Slot,
    xo: Slot,
    ho: Slot,
    co: Slot,
    bi: Slot,
    bf: Slot,
    bc: Slot,
    bo: Slot,
}

/// Activations of one time step, kept for back-propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    /// candidate `tanh(W_xc x + W_hc h + b_c)`
    pub g: Array1<f64>,
    pub c: Array1<f64>,
    pub o: Array1<f64>,
    pub h: Array1<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl LstmCell {
    pub(crate) fn new(layout: &mut ParamLayout, name: &str, inputs: usize, hidden: usize) -> Self {
        let mut m = |n: &str, cols: usize| layout.push(format!("{name}.{n}"), &[hidden, cols]);
        let (xi, hi, ci) = (m("w_xi", inputs), m("w_hi", hidden), m("w_ci", hidden));
        let (xf, hf, cf) = (m("w_xf", inputs), m("w_hf", hidden), m("w_cf", hidden));
        let (xc, hc) = (m("w_xc", inputs), m("w_hc", hidden));
        let (xo, ho, co) = (m("w_xo", inputs), m("w_ho", hidden), m("w_co", hidden));
        let mut b = |n: &str| layout.push(format!("{name}.{n}"), &[hidden]);
        let (bi, bf, bc, bo) = (b("b_i"), b("b_f"), b("b_c"), b("b_o"));
        LstmCell {
            inputs,
            hidden,
            w: Weights {
                xi,
                hi,
                ci,
                xf,
                hf,
                cf,
                xc,
                hc,
                xo,
                ho,
                co,
                bi,
                bf,
                bc,
                bo,
            },
        }
    }

    pub(crate) fn input_matrices(&self) -> [Slot; 4] {
        [self.w.xi, self.w.xf, self.w.xc, self.w.xo]
    }

    pub(crate) fn recurrent_matrices(&self) -> [Slot; 4] {
        [self.w.hi, self.w.hf, self.w.hc, self.w.ho]
    }

    pub(crate) fn peephole_matrices(&self) -> [Slot; 3] {
        [self.w.ci, self.w.cf, self.w.co]
    }

    pub(crate) fn forget_bias(&self) -> Slot {
        self.w.bf
    }

    fn mat<'p>(&self, p: &'p [f64], s: Slot) -> ArrayView2<'p, f64> {
        ArrayView2::from_shape((self.hidden, s.len / self.hidden), s.of(p)).expect("slot")
    }

    fn vec<'p>(&self, p: &'p [f64], s: Slot) -> ArrayView1<'p, f64> {
        ArrayView1::from(s.of(p))
    }

    /// One time step.
    pub fn step(&self, p: &[f64], x: ArrayView1<'_, f64>, h_prev: ArrayView1<'_, f64>, c_prev: ArrayView1<'_, f64>) -> Result<LstmStep> {
        if x.len() != self.inputs || h_prev.len() != self.hidden || c_prev.len() != self.hidden {
            return Err(Error::Shape(format!(
                "lstm step with x {}, h {}, c {} for inputs {} hidden {}",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                self.inputs,
                self.hidden
            )));
        }
        let w = &self.w;
        let pre = |xs: Slot, hs: Slot, b: Slot| self.mat(p, xs).dot(&x) + self.mat(p, hs).dot(&h_prev) + self.vec(p, b);
        let i = (pre(w.xi, w.hi, w.bi) + self.mat(p, w.ci).dot(&c_prev)).mapv(sigmoid);
        let f = (pre(w.xf, w.hf, w.bf) + self.mat(p, w.cf).dot(&c_prev)).mapv(sigmoid);
        let g = pre(w.xc, w.hc, w.bc).mapv(f64::tanh);
        let c = &f * &c_prev + &i * &g;
        let o = (pre(w.xo, w.ho, w.bo) + self.mat(p, w.co).dot(&c)).mapv(sigmoid);
        let h = &o * &c.mapv(f64::tanh);
        Ok(LstmStep {
            x: x.to_owned(),
            h_prev: h_prev.to_owned(),
            c_prev: c_prev.to_owned(),
            i,
            f,
            g,
            c,
            o,
            h,
        })
    }

    /// Runs the sequence from zero state.
    pub fn forward(&self, p: &[f64], xs: &[Array1<f64>]) -> Result<Vec<LstmStep>> {
        let mut h = Array1::zeros(self.hidden);
        let mut c = Array1::zeros(self.hidden);
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let s = self.step(p, x.view(), h.view(), c.view())?;
            h = s.h.clone();
            c = s.c.clone();
            steps.push(s);
        }
        Ok(steps)
    }

    /// Back-propagation through time given the loss gradient w.r.t. the
    /// last hidden state. Returns the gradient w.r.t. every input.
    pub fn backward(&self, p: &[f64], steps: &[LstmStep], dh_last: ArrayView1<'_, f64>, g: &mut [f64]) -> Vec<Array1<f64>> {
        let w = &self.w;
        let mut dh = dh_last.to_owned();
        let mut dc = Array1::<f64>::zeros(self.hidden);
        let mut dxs = vec![Array1::zeros(self.inputs); steps.len()];
        for (t, s) in steps.iter().enumerate().rev() {
            let tc = s.c.mapv(f64::tanh);
            let d_o = &dh * &tc;
            dc += &(&dh * &s.o * &tc.mapv(|v| 1.0 - v * v));
            let dao = &d_o * &s.o.mapv(|v| v * (1.0 - v));
            dc += &self.mat(p, w.co).t().dot(&dao);

            let di = &dc * &s.g;
            let df = &dc * &s.c_prev;
            let dgc = &dc * &s.i;
            let dc_prev = &dc * &s.f;

            let dai = &di * &s.i.mapv(|v| v * (1.0 - v));
            let daf = &df * &s.f.mapv(|v| v * (1.0 - v));
            let dag = &dgc * &s.g.mapv(|v| 1.0 - v * v);

            let mut dh_prev = Array1::zeros(self.hidden);
            let mut dx = Array1::zeros(self.inputs);
            let mut dc_next = dc_prev;
            for (da, xs, hs, cs, b, c_in) in [
                (&dai, w.xi, w.hi, Some(w.ci), w.bi, &s.c_prev),
                (&daf, w.xf, w.hf, Some(w.cf), w.bf, &s.c_prev),
                (&dag, w.xc, w.hc, None, w.bc, &s.c_prev),
                (&dao, w.xo, w.ho, Some(w.co), w.bo, &s.c),
            ] {
                outer_add(self.hidden, xs.of_mut(g), da, &s.x);
                outer_add(self.hidden, hs.of_mut(g), da, &s.h_prev);
                if let Some(cs) = cs {
                    outer_add(self.hidden, cs.of_mut(g), da, c_in);
                    if cs != w.co {
                        dc_next += &self.mat(p, cs).t().dot(da);
                    }
                }
                ArrayViewMut1::from(b.of_mut(g)).scaled_add(1.0, da);
                dx += &self.mat(p, xs).t().dot(da);
                dh_prev += &self.mat(p, hs).t().dot(da);
            }
            dxs[t] = dx;
            dh = dh_prev;
            dc = dc_next;
        }
        dxs
    }
}

/// `g += a ⊗ b` for a row-major `[a.len(), b.len()]` block.
fn outer_add(rows: usize, g: &mut [f64], a: &Array1<f64>, b: &Array1<f64>) {
    let mut m = ArrayViewMut2::from_shape((rows, b.len()), g).expect("slot");
    for (mut row, &av) in m.rows_mut().into_iter().zip(a) {
        row.scaled_add(av, b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::fill_uniform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell(inputs: usize, hidden: usize) -> (LstmCell, usize) {
        let mut layout = ParamLayout::default();
        let c = LstmCell::new(&mut layout, "lstm", inputs, hidden);
        (c, layout.len())
    }

    #[test]
    fn zero_parameters_keep_zero_state() {
        let (c, n) = cell(3, 2);
        let p = vec![0.0; n];
        let s = c.step(&p, Array1::from(vec![1.0, -2.0, 0.5]).view(), Array1::zeros(2).view(), Array1::zeros(2).view()).unwrap();
        assert!(s.h.iter().chain(&s.c).all(|&v| v == 0.0));
        assert!(s.i.iter().chain(&s.f).chain(&s.o).all(|&v| v == 0.5));
    }

    #[test]
    fn scalar_hand_evaluation() {
        let (c, n) = cell(1, 1);
        let mut p = vec![1.0; n];
        for b in [c.w.bi, c.w.bf, c.w.bc, c.w.bo] {
            p[b.offset] = 0.0;
        }
        let s = c.step(&p, Array1::from(vec![0.0]).view(), Array1::from(vec![0.0]).view(), Array1::from(vec![1.0]).view()).unwrap();
        // independent evaluation of the gate equations
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = sig(1.0);
        let c_t = i * 1.0 + i * 0.0f64.tanh();
        let o = sig(c_t);
        let h = o * c_t.tanh();
        assert!((s.i[0] - 0.731_058_578_630_004_9).abs() < 1e-12 && (s.i[0] - i).abs() < 1e-15);
        assert!((s.c[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((s.o[0] - 0.675_037_527_376_823_7).abs() < 1e-12);
        assert!((s.h[0] - 0.421_029_377_428_353).abs() < 1e-12 && (s.h[0] - h).abs() < 1e-15);
    }

    #[test]
    fn gates_stay_in_open_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (c, n) = cell(4, 3);
        let mut p = vec![0.0; n];
        fill_uniform(&mut rng, &mut p, 3.0);
        let xs: Vec<Array1<f64>> = (0..6).map(|k| Array1::from_shape_fn(4, |j| (k * 4 + j) as f64 * 0.3 - 2.0)).collect();
        for s in c.forward(&p, &xs).unwrap() {
            assert!(s.i.iter().chain(&s.f).chain(&s.o).all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (c, n) = cell(3, 2);
        let p = vec![0.0; n];
        assert!(c.step(&p, Array1::zeros(2).view(), Array1::zeros(2).view(), Array1::zeros(2).view()).is_err());
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (c, n) = cell(3, 2);
        let mut p = vec![0.0; n];
        fill_uniform(&mut rng, &mut p, 0.8);
        let mut flat = vec![0.0; 12];
        fill_uniform(&mut rng, &mut flat, 1.0);
        let xs: Vec<Array1<f64>> = flat.chunks(3).map(|c| Array1::from(c.to_vec())).collect();
        let probe = Array1::from(vec![0.7, -1.3]);
        let loss = |p: &[f64], xs: &[Array1<f64>]| c.forward(p, xs).unwrap().last().unwrap().h.dot(&probe);
        let mut g = vec![0.0; n];
        let steps = c.forward(&p, &xs).unwrap();
        let dxs = c.backward(&p, &steps, probe.view(), &mut g);
        let h = 1e-6;
        for k in 0..n {
            let (mut a, mut b) = (p.clone(), p.clone());
            a[k] += h;
            b[k] -= h;
            let fd = (loss(&a, &xs) - loss(&b, &xs)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "param {k}: {fd} vs {}", g[k]);
        }
        for t in 0..xs.len() {
            for j in 0..3 {
                let (mut a, mut b) = (xs.clone(), xs.clone());
                a[t][j] += h;
                b[t][j] -= h;
                let fd = (loss(&p, &a) - loss(&p, &b)) / (2.0 * h);
                assert!((fd - dxs[t][j]).abs() < 1e-8);
            }
        }
    }
}
