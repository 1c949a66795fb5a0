use crate::real::Real;

/// Per-direction record of one forward pass. All vectors are indexed
/// `[chain][sentence position]`, so the backward direction's entries line up
/// with the tokens they were computed at, not with processing order.
#[derive(Debug, Clone)]
pub struct DirectionTrace<F> {
    /// Unit-norm memories after each update.
    pub memories: Vec<Vec<Vec<F>>>,
    /// Delay states (zeros when the gate mode has no delay recurrence).
    pub delays: Vec<Vec<Vec<F>>>,
    /// Candidate memories before gating.
    pub candidates: Vec<Vec<Vec<F>>>,
    /// Scalar gate values, each strictly in (0, 1).
    pub gates: Vec<Vec<F>>,
}

impl<F: Real> DirectionTrace<F> {
    pub(crate) fn with_capacity(n_chains: usize, m: usize) -> Self {
        DirectionTrace {
            memories: vec![Vec::with_capacity(m); n_chains],
            delays: vec![Vec::with_capacity(m); n_chains],
            candidates: vec![Vec::with_capacity(m); n_chains],
            gates: vec![Vec::with_capacity(m); n_chains],
        }
    }

    pub fn len(&self) -> usize {
        self.gates.first().map(Vec::len).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Full per-instance trace: both directions plus position-aligned combined
/// memories and the per-chain summary states the classifier consumed.
#[derive(Debug, Clone)]
pub struct ChainTrace<F> {
    pub fwd: DirectionTrace<F>,
    pub bwd: DirectionTrace<F>,
    /// `combined[chain][pos] = fwd.memories[chain][pos] + bwd.memories[chain][pos]`
    pub combined: Vec<Vec<Vec<F>>>,
    /// Per-chain summary: forward state after the full left-to-right pass
    /// plus backward state after the full right-to-left pass.
    pub summaries: Vec<Vec<F>>,
}

impl<F: Real> ChainTrace<F> {
    /// Gate value averaged over chains and both directions at one position.
    pub fn mean_gate_at(&self, pos: usize) -> f64 {
        let n_chains = self.fwd.gates.len();
        let mut sum = 0.0;
        for j in 0..n_chains {
            sum += self.fwd.gates[j][pos].to_f64();
            sum += self.bwd.gates[j][pos].to_f64();
        }
        sum / (2 * n_chains) as f64
    }

    pub fn n_chains(&self) -> usize {
        self.fwd.gates.len()
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Model output for one instance, reported in f64 regardless of the
/// training precision.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// Class probabilities over positive / negative / none.
    pub class_probs: Vec<f64>,
    /// Attention weights over chains.
    pub attention: Vec<f64>,
    /// Attention-weighted summary vector.
    pub summary: Vec<f64>,
}

impl Prediction {
    pub fn predicted_class(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.class_probs.iter().enumerate() {
            if p > self.class_probs[best] {
                best = i;
            }
        }
        best
    }
}
