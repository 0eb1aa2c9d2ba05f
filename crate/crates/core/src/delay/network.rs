//! Interconnections of rational blocks, static gains and pure delays.

use std::collections::VecDeque;

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::linalg::{self, CMatrix};
use crate::ss::StateSpace;
use crate::{lit, to_f64, Error, Real, Result};

/// Where a signal comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    External(usize),
    Block { block: usize, port: usize },
}

/// Weighted sum of sources (a summing junction).
pub type Signal<T> = Vec<(Source, T)>;

pub fn ext<T: Real>(i: usize) -> Signal<T> {
    vec![(Source::External(i), T::one())]
}

pub fn port<T: Real>(block: usize, port: usize) -> Signal<T> {
    vec![(Source::Block { block, port }, T::one())]
}

pub fn scale<T: Real>(s: &Signal<T>, k: T) -> Signal<T> {
    s.iter().map(|&(src, w)| (src, w * k)).collect()
}

pub fn sum<T: Real>(parts: &[Signal<T>]) -> Signal<T> {
    parts.iter().flatten().copied().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind<T: Real> {
    Rational(StateSpace<T>),
    /// `width` parallel channels delayed by `theta` seconds.
    Delay {
        theta: T,
        width: usize,
    },
    Gain(DMatrix<T>),
}

impl<T: Real> BlockKind<T> {
    pub fn n_in(&self) -> usize {
        match self {
            BlockKind::Rational(s) => s.nu(),
            BlockKind::Delay { width, .. } => *width,
            BlockKind::Gain(g) => g.ncols(),
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            BlockKind::Rational(s) => s.ny(),
            BlockKind::Delay { width, .. } => *width,
            BlockKind::Gain(g) => g.nrows(),
        }
    }

    /// Output depends instantaneously on the input.
    pub fn feedthrough(&self) -> bool {
        match self {
            BlockKind::Rational(s) => s.d.iter().any(|v| *v != T::zero()),
            BlockKind::Delay { theta, .. } => *theta == T::zero(),
            BlockKind::Gain(_) => true,
        }
    }

    fn response(&self, s: Complex<T>) -> Result<CMatrix<T>> {
        match self {
            BlockKind::Rational(sys) => sys.eval(s),
            BlockKind::Delay { theta, width } => {
                let e = ComplexField::exp(-s * Complex::from(*theta));
                Ok(CMatrix::from_diagonal_element(*width, *width, e))
            }
            BlockKind::Gain(g) => Ok(linalg::to_complex(g)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetBlock<T: Real> {
    pub name: String,
    pub kind: BlockKind<T>,
    pub inputs: Vec<Signal<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayNetwork<T: Real> {
    pub blocks: Vec<NetBlock<T>>,
    pub input_names: Vec<String>,
    pub outputs: Vec<Signal<T>>,
    pub output_names: Vec<String>,
}

impl<T: Real> DelayNetwork<T> {
    pub fn new<S: Into<String>>(inputs: impl IntoIterator<Item = S>) -> Self {
        Self {
            blocks: Vec::new(),
            input_names: inputs.into_iter().map(Into::into).collect(),
            outputs: Vec::new(),
            output_names: Vec::new(),
        }
    }

    /// Static gain network `y = G u`.
    pub fn gain(g: DMatrix<T>) -> Self {
        let mut net = Self::new((0..g.ncols()).map(|i| format!("u{}", i + 1)));
        for r in 0..g.nrows() {
            let sig = (0..g.ncols())
                .filter(|&c| g[(r, c)] != T::zero())
                .map(|c| (Source::External(c), g[(r, c)]))
                .collect();
            net.add_output(format!("y{}", r + 1), sig);
        }
        net
    }

    pub fn n_inputs(&self) -> usize {
        self.input_names.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn add_block(&mut self, name: impl Into<String>, kind: BlockKind<T>) -> usize {
        let n_in = kind.n_in();
        self.blocks.push(NetBlock {
            name: name.into(),
            kind,
            inputs: vec![Vec::new(); n_in],
        });
        self.blocks.len() - 1
    }

    /// Adds `signal` to input `port` of `block`.
    pub fn connect(&mut self, block: usize, port: usize, signal: Signal<T>) {
        self.blocks[block].inputs[port].extend(signal);
    }

    pub fn add_output(&mut self, name: impl Into<String>, signal: Signal<T>) {
        self.output_names.push(name.into());
        self.outputs.push(signal);
    }

    /// Copies `sub` into `self`, feeding its external inputs with `inputs`;
    /// returns its outputs expressed in `self`'s sources.
    pub fn embed(&mut self, sub: &DelayNetwork<T>, inputs: &[Signal<T>]) -> Result<Vec<Signal<T>>> {
        if inputs.len() != sub.n_inputs() {
            return Err(Error::DimensionMismatch("embedded network inputs".into()));
        }
        let offset = self.blocks.len();
        let remap = |sig: &Signal<T>| -> Signal<T> {
            sig.iter()
                .flat_map(|&(src, w)| match src {
                    Source::External(i) => scale(&inputs[i], w),
                    Source::Block { block, port } => vec![(
                        Source::Block {
                            block: block + offset,
                            port,
                        },
                        w,
                    )],
                })
                .collect()
        };
        for b in &sub.blocks {
            self.blocks.push(NetBlock {
                name: b.name.clone(),
                kind: b.kind.clone(),
                inputs: b.inputs.iter().map(remap).collect(),
            });
        }
        Ok(sub.outputs.iter().map(remap).collect())
    }

    pub fn min_delay(&self) -> Option<T> {
        self.blocks
            .iter()
            .filter_map(|b| match b.kind {
                BlockKind::Delay { theta, .. } if theta > T::zero() => Some(theta),
                _ => None,
            })
            .reduce(|a, b| a.min(b))
    }

    fn check_signal(&self, sig: &Signal<T>) -> Result<()> {
        for (src, w) in sig {
            if !w.is_finite() {
                return Err(Error::NonFinite("connection weight"));
            }
            match *src {
                Source::External(i) if i >= self.n_inputs() => {
                    return Err(Error::DimensionMismatch(format!("external input {i}")))
                }
                Source::Block { block, port } => {
                    let ok = self
                        .blocks
                        .get(block)
                        .is_some_and(|b| port < b.kind.n_out());
                    if !ok {
                        return Err(Error::DimensionMismatch(format!(
                            "source block {block} port {port}"
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Validates ports and returns the evaluation order of the
    /// feedthrough blocks.
    pub fn validate(&self) -> Result<Vec<usize>> {
        for b in &self.blocks {
            if let BlockKind::Delay { theta, .. } = b.kind {
                if !(theta >= T::zero()) || !theta.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "delay {} must be ≥ 0",
                        b.name
                    )));
                }
            }
            for sig in &b.inputs {
                self.check_signal(sig)?;
            }
        }
        for sig in &self.outputs {
            self.check_signal(sig)?;
        }
        // Kahn's algorithm over the feedthrough sub-graph
        let nb = self.blocks.len();
        let ft: Vec<bool> = self.blocks.iter().map(|b| b.kind.feedthrough()).collect();
        let mut deps: Vec<Vec<usize>> = vec![Vec::new(); nb];
        let mut indeg = vec![0usize; nb];
        for (j, b) in self.blocks.iter().enumerate() {
            if !ft[j] {
                continue;
            }
            let mut srcs: Vec<usize> = b
                .inputs
                .iter()
                .flatten()
                .filter_map(|(s, _)| match s {
                    Source::Block { block, .. } if ft[*block] => Some(*block),
                    _ => None,
                })
                .collect();
            srcs.sort_unstable();
            srcs.dedup();
            for s in srcs {
                deps[s].push(j);
                indeg[j] += 1;
            }
        }
        let mut queue: VecDeque<usize> = (0..nb).filter(|&j| ft[j] && indeg[j] == 0).collect();
        let mut order = Vec::new();
        while let Some(j) = queue.pop_front() {
            order.push(j);
            for &k in &deps[j] {
                indeg[k] -= 1;
                if indeg[k] == 0 {
                    queue.push_back(k);
                }
            }
        }
        if order.len() != ft.iter().filter(|&&f| f).count() {
            return Err(Error::AlgebraicLoop);
        }
        Ok(order)
    }

    /// Transfer matrix (outputs × inputs) at the complex frequency `s`.
    pub fn frequency_response(&self, s: Complex<T>) -> Result<CMatrix<T>> {
        let offsets: Vec<usize> = self
            .blocks
            .iter()
            .scan(0, |acc, b| {
                let o = *acc;
                *acc += b.kind.n_out();
                Some(o)
            })
            .collect();
        let total: usize = self.blocks.iter().map(|b| b.kind.n_out()).sum();
        let nu = self.n_inputs();
        let to_rows = |sig: &Signal<T>, row: &mut Vec<(usize, T)>, ext: &mut Vec<(usize, T)>| {
            for &(src, w) in sig {
                match src {
                    Source::External(i) => ext.push((i, w)),
                    Source::Block { block, port } => row.push((offsets[block] + port, w)),
                }
            }
        };
        // Y = H (S Y + E u)
        let mut lhs = CMatrix::<T>::identity(total, total);
        let mut rhs = CMatrix::<T>::zeros(total, nu);
        for (b, blk) in self.blocks.iter().enumerate() {
            let h = blk.kind.response(s)?;
            let n_in = blk.kind.n_in();
            let mut s_mat = CMatrix::<T>::zeros(n_in, total);
            let mut e_mat = CMatrix::<T>::zeros(n_in, nu);
            for (p, sig) in blk.inputs.iter().enumerate() {
                let (mut row, mut ext_row) = (Vec::new(), Vec::new());
                to_rows(sig, &mut row, &mut ext_row);
                for (c, w) in row {
                    s_mat[(p, c)] += Complex::from(w);
                }
                for (c, w) in ext_row {
                    e_mat[(p, c)] += Complex::from(w);
                }
            }
            let hs = &h * &s_mat;
            let he = &h * &e_mat;
            let o = offsets[b];
            for r in 0..blk.kind.n_out() {
                for c in 0..total {
                    lhs[(o + r, c)] -= hs[(r, c)];
                }
                for c in 0..nu {
                    rhs[(o + r, c)] += he[(r, c)];
                }
            }
        }
        let y = if total == 0 {
            CMatrix::zeros(0, nu)
        } else {
            lhs.lu()
                .solve(&rhs)
                .ok_or(Error::Singular("network frequency response"))?
        };
        let mut out = CMatrix::zeros(self.n_outputs(), nu);
        for (r, sig) in self.outputs.iter().enumerate() {
            for &(src, w) in sig {
                match src {
                    Source::External(i) => out[(r, i)] += Complex::from(w),
                    Source::Block { block, port } => {
                        let row = y.row(offsets[block] + port) * Complex::from(w);
                        let mut target = out.row_mut(r);
                        target += row;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// History of a delay line on a uniform grid, linearly interpolated.
#[derive(Debug, Clone)]
struct DelayLine<T: Real> {
    samples: VecDeque<DVector<T>>,
    /// Grid index of `samples[0]`.
    first: usize,
    capacity: usize,
    width: usize,
}

impl<T: Real> DelayLine<T> {
    fn new(theta: T, dt: T, width: usize) -> Self {
        let capacity = to_f64(theta / dt).ceil() as usize + 4;
        Self {
            samples: VecDeque::with_capacity(capacity),
            first: 0,
            capacity,
            width,
        }
    }

    fn push(&mut self, v: DVector<T>) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
            self.first += 1;
        }
        self.samples.push_back(v);
    }

    /// Value at grid position `pos` (fractional), zero before the start.
    fn at(&self, pos: T) -> DVector<T> {
        if pos < T::zero() {
            return DVector::zeros(self.width);
        }
        let k = to_f64(pos.floor()) as usize;
        let frac = pos - lit::<T>(k as f64);
        let get = |i: usize| -> Option<&DVector<T>> {
            i.checked_sub(self.first).and_then(|j| self.samples.get(j))
        };
        match (get(k), get(k + 1)) {
            (Some(a), Some(b)) => a * (T::one() - frac) + b * frac,
            (Some(a), None) => a.clone(),
            _ => self
                .samples
                .back()
                .cloned()
                .unwrap_or_else(|| DVector::zeros(self.width)),
        }
    }
}

/// Fixed-step simulator: RK4 on the rational states, ring-buffer delays.
#[derive(Debug, Clone)]
pub struct NetworkSim<T: Real> {
    net: DelayNetwork<T>,
    order: Vec<usize>,
    states: Vec<DVector<T>>,
    lines: Vec<Option<DelayLine<T>>>,
    dt: T,
    step_index: usize,
}

impl<T: Real> NetworkSim<T> {
    pub fn new(net: &DelayNetwork<T>, dt: T) -> Result<Self> {
        let order = net.validate()?;
        if !(dt > T::zero()) {
            return Err(Error::InvalidArgument("time step must be positive".into()));
        }
        if let Some(min) = net.min_delay() {
            if dt > min / lit(10.0) {
                return Err(Error::StepTooLarge {
                    dt: to_f64(dt),
                    min_delay: to_f64(min),
                });
            }
        }
        let states = net
            .blocks
            .iter()
            .map(|b| match &b.kind {
                BlockKind::Rational(s) => DVector::zeros(s.nx()),
                _ => DVector::zeros(0),
            })
            .collect();
        let lines = net
            .blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Delay { theta, width } if theta > T::zero() => {
                    Some(DelayLine::new(theta, dt, width))
                }
                _ => None,
            })
            .collect();
        Ok(Self {
            net: net.clone(),
            order,
            states,
            lines,
            dt,
            step_index: 0,
        })
    }

    pub fn time(&self) -> T {
        self.dt * lit(self.step_index as f64)
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    fn gather(sig: &Signal<T>, outs: &[DVector<T>], u: &DVector<T>) -> T {
        sig.iter().fold(T::zero(), |acc, &(src, w)| {
            acc + w * match src {
                Source::External(i) => u[i],
                Source::Block { block, port } => outs[block][port],
            }
        })
    }

    fn block_input(&self, b: usize, outs: &[DVector<T>], u: &DVector<T>) -> DVector<T> {
        let blk = &self.net.blocks[b];
        DVector::from_iterator(
            blk.inputs.len(),
            blk.inputs.iter().map(|s| Self::gather(s, outs, u)),
        )
    }

    /// All block outputs at time `t` for the given states.
    fn signals(&self, t: T, states: &[DVector<T>], u: &DVector<T>) -> Vec<DVector<T>> {
        let mut outs: Vec<DVector<T>> = self
            .net
            .blocks
            .iter()
            .enumerate()
            .map(|(b, blk)| match &blk.kind {
                BlockKind::Rational(s) if !blk.kind.feedthrough() => &s.c * &states[b],
                BlockKind::Delay { theta, width } => match &self.lines[b] {
                    Some(line) => line.at((t - *theta) / self.dt),
                    None => DVector::zeros(*width),
                },
                k => DVector::zeros(k.n_out()),
            })
            .collect();
        for &b in &self.order {
            let input = self.block_input(b, &outs, u);
            outs[b] = match &self.net.blocks[b].kind {
                BlockKind::Rational(s) => &s.c * &states[b] + &s.d * &input,
                BlockKind::Gain(g) => g * &input,
                BlockKind::Delay { .. } => input,
            };
        }
        outs
    }

    fn derivatives(&self, t: T, states: &[DVector<T>], u: &DVector<T>) -> Vec<DVector<T>> {
        let outs = self.signals(t, states, u);
        self.net
            .blocks
            .iter()
            .enumerate()
            .map(|(b, blk)| match &blk.kind {
                BlockKind::Rational(s) if s.nx() > 0 => {
                    &s.a * &states[b] + &s.b * self.block_input(b, &outs, u)
                }
                _ => DVector::zeros(states[b].len()),
            })
            .collect()
    }

    /// Network outputs at the current time for external input `u`, without
    /// advancing.
    pub fn peek(&self, u: &DVector<T>) -> DVector<T> {
        let outs = self.signals(self.time(), &self.states, u);
        DVector::from_iterator(
            self.net.outputs.len(),
            self.net.outputs.iter().map(|s| Self::gather(s, &outs, u)),
        )
    }

    /// Records the delay inputs at the current time and advances one step;
    /// `input(t)` supplies the external inputs on `[t, t + dt]`. Returns the
    /// outputs at the start of the step.
    pub fn step(&mut self, input: &dyn Fn(T) -> DVector<T>) -> DVector<T> {
        let t = self.time();
        let dt = self.dt;
        let u0 = input(t);
        let outs = self.signals(t, &self.states, &u0);
        let y = DVector::from_iterator(
            self.net.outputs.len(),
            self.net.outputs.iter().map(|s| Self::gather(s, &outs, &u0)),
        );
        for b in 0..self.net.blocks.len() {
            if self.lines[b].is_some() {
                let v = self.block_input(b, &outs, &u0);
                if let Some(line) = self.lines[b].as_mut() {
                    line.push(v);
                }
            }
        }
        let half = dt * lit(0.5);
        let axpy = |x: &[DVector<T>], k: &[DVector<T>], h: T| -> Vec<DVector<T>> {
            x.iter().zip(k).map(|(a, b)| a + b * h).collect()
        };
        let k1 = self.derivatives(t, &self.states, &u0);
        let um = input(t + half);
        let k2 = self.derivatives(t + half, &axpy(&self.states, &k1, half), &um);
        let k3 = self.derivatives(t + half, &axpy(&self.states, &k2, half), &um);
        let k4 = self.derivatives(t + dt, &axpy(&self.states, &k3, dt), &input(t + dt));
        let sixth = dt / lit(6.0);
        for b in 0..self.states.len() {
            let inc = &k1[b] + (&k2[b] + &k3[b]) * lit::<T>(2.0) + &k4[b];
            self.states[b] += inc * sixth;
        }
        self.step_index += 1;
        y
    }
}

/// Sampled outputs of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Traces<T: Real> {
    pub t: Vec<T>,
    pub names: Vec<String>,
    pub values: Vec<DVector<T>>,
}

impl<T: Real> Traces<T> {
    pub fn column(&self, k: usize) -> Vec<T> {
        self.values.iter().map(|v| v[k]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (t, v) in self.t.iter().zip(&self.values) {
            s.push_str(&format!("{:.11e}", to_f64(*t)));
            for x in v.iter() {
                s.push_str(&format!(",{:.11e}", to_f64(*x)));
            }
            s.push('\n');
        }
        s
    }
}

/// Simulates `net` on `[0, horizon]` with step `dt`.
pub fn simulate_network<T: Real>(
    net: &DelayNetwork<T>,
    input: &dyn Fn(T) -> DVector<T>,
    dt: T,
    horizon: T,
) -> Result<Traces<T>> {
    let mut sim = NetworkSim::new(net, dt)?;
    let steps = to_f64(horizon / dt).round() as usize;
    let mut t = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    for _ in 0..=steps {
        t.push(sim.time());
        values.push(sim.step(input));
    }
    if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite("simulation diverged"));
    }
    Ok(Traces {
        t,
        names: net.output_names.clone(),
        values,
    })
}

/// Unit step with the half-maximum convention at the jump.
pub fn step_signal<T: Real>(t: T) -> T {
    if t > T::zero() {
        T::one()
    } else if t == T::zero() {
        lit(0.5)
    } else {
        T::zero()
    }
}
