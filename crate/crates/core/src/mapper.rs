//! Mapping network from encoder features to word elements, its mirrored
//! reconstruction network, and the alignment training loop.
//!
//! Forward map for a d×h feature matrix `F`:
//!
//! ```text
//! C = tanh(LN(proj(Σ_w conv_w(F)) + res(F)))        d×n
//! ```
//!
//! where each `conv_w` is a same-padded convolution of odd width `w` along
//! the token axis. The reconstruction network mirrors the block from n back
//! to h without the normalization and squashing, since encoder features are
//! not bounded.
//!
//! Training minimizes `L_MS + L_Rec`: the mean over all d² pairs of
//! `(cos(c_i, c_j) - M_S[i][j])²` plus the mean absolute reconstruction
//! error. The diagonal is included, so every sentence carries a constant
//! `(1 - M_S[i][i])²` term that training cannot remove.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::akn::{AssocMatrix, AssocNetwork};
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::numkernel::{uniform, Adam, Bound, Graph, ParamId, ParamStore, Tensor2, Var};
use crate::seed::{stage_rng, Stage};

pub const DEFAULT_FILTER_WIDTHS: [usize; 3] = [1, 3, 5];

#[derive(Clone, Debug, PartialEq)]
pub struct MapperConfig {
    /// Encoder hidden size h.
    pub hidden: usize,
    /// Coordinate size n.
    pub coords: usize,
    /// Output channels of every convolution in a bank.
    pub channels: usize,
    pub widths: Vec<usize>,
    pub seed: u64,
}

impl MapperConfig {
    pub fn new(hidden: usize, coords: usize, seed: u64) -> Self {
        Self {
            hidden,
            coords,
            channels: 2 * coords,
            widths: DEFAULT_FILTER_WIDTHS.to_vec(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.coords < 2 || self.channels == 0 {
            return Err(Error::Invalid(format!(
                "mapper needs hidden > 0, coords >= 2, channels > 0 (got {}, {}, {})",
                self.hidden, self.coords, self.channels
            )));
        }
        if self.widths.is_empty() || self.widths.iter().any(|w| w % 2 == 0) {
            return Err(Error::Invalid(format!("filter widths must be odd, got {:?}", self.widths)));
        }
        Ok(())
    }
}

/// Convolution bank summed, projected, plus a linear residual: in → out.
#[derive(Clone, Debug, PartialEq)]
struct ConvBlock {
    convs: Vec<(usize, ParamId, ParamId)>,
    proj: (ParamId, ParamId),
    res: (ParamId, ParamId),
}

fn linear(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Tensor2 {
    uniform(rng, fan_in, fan_out, 1.0 / libm::sqrt(fan_in as f64))
}

impl ConvBlock {
    fn init(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        prefix: &str,
        cfg: &MapperConfig,
        input: usize,
        output: usize,
    ) -> Self {
        let mut convs = Vec::with_capacity(cfg.widths.len());
        for &w in &cfg.widths {
            let wt = store.add(&format!("{prefix}conv{w}.weight"), linear(rng, w * input, cfg.channels));
            let b = store.add(&format!("{prefix}conv{w}.bias"), Tensor2::zeros(1, cfg.channels));
            convs.push((w, wt, b));
        }
        let proj = (
            store.add(&format!("{prefix}proj.weight"), linear(rng, cfg.channels, output)),
            store.add(&format!("{prefix}proj.bias"), Tensor2::zeros(1, output)),
        );
        let res = (
            store.add(&format!("{prefix}res.weight"), linear(rng, input, output)),
            store.add(&format!("{prefix}res.bias"), Tensor2::zeros(1, output)),
        );
        Self { convs, proj, res }
    }

    fn forward(&self, g: &mut Graph, b: &Bound, x: Var) -> Result<Var> {
        let mut sum: Option<Var> = None;
        for &(w, wt, bias) in &self.convs {
            let patches = if w == 1 { x } else { g.unfold(x, w)? };
            let y = g.matmul(patches, b.var(wt))?;
            let y = g.add_row(y, b.var(bias))?;
            sum = Some(match sum {
                Some(s) => g.add(s, y)?,
                None => y,
            });
        }
        let sum = sum.ok_or(Error::Empty("convolution bank"))?;
        let p = g.matmul(sum, b.var(self.proj.0))?;
        let p = g.add_row(p, b.var(self.proj.1))?;
        let r = g.matmul(x, b.var(self.res.0))?;
        let r = g.add_row(r, b.var(self.res.1))?;
        g.add(p, r)
    }
}

/// Copies stored tensors into a freshly laid-out store, checking names and
/// shapes.
fn restore(fresh: &mut ParamStore, stored: &ParamStore) -> Result<()> {
    if fresh.len() != stored.len() {
        return Err(Error::Invalid(format!(
            "expected {} parameter tensors, got {}",
            fresh.len(),
            stored.len()
        )));
    }
    for id in fresh.ids().collect::<Vec<_>>() {
        if fresh.name(id) != stored.name(id) {
            return Err(Error::Invalid(format!(
                "parameter {} found where {} was expected",
                stored.name(id),
                fresh.name(id)
            )));
        }
        fresh.set(id, stored.get(id).clone())?;
    }
    Ok(())
}

/// Word elements of one sentence: d×n, entries in (−1, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct WordElements(pub Tensor2);

impl WordElements {
    pub fn as_tensor(&self) -> &Tensor2 {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapperNet {
    config: MapperConfig,
    params: ParamStore,
    block: ConvBlock,
    ln_gain: ParamId,
    ln_bias: ParamId,
}

impl MapperNet {
    pub fn new(config: MapperConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stage_rng(config.seed, Stage::Mapper);
        let mut params = ParamStore::new();
        let block = ConvBlock::init(&mut params, &mut rng, "", &config, config.hidden, config.coords);
        let ln_gain = params.add("ln.gain", Tensor2::filled(1, config.coords, 1.0));
        let ln_bias = params.add("ln.bias", Tensor2::zeros(1, config.coords));
        Ok(Self {
            config,
            params,
            block,
            ln_gain,
            ln_bias,
        })
    }

    pub fn from_params(config: MapperConfig, stored: &ParamStore) -> Result<Self> {
        let mut net = Self::new(config)?;
        restore(&mut net.params, stored)?;
        Ok(net)
    }

    pub fn config(&self) -> &MapperConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn forward(&self, g: &mut Graph, b: &Bound, features: Var) -> Result<Var> {
        let cols = g.value(features).cols();
        if cols != self.config.hidden {
            return Err(Error::Shape {
                op: "map_forward",
                expected: (g.value(features).rows(), self.config.hidden),
                found: g.value(features).shape(),
            });
        }
        let y = self.block.forward(g, b, features)?;
        let y = g.layer_norm(y, b.var(self.ln_gain), b.var(self.ln_bias))?;
        Ok(g.tanh(y))
    }

    pub fn map(&self, features: &Tensor2) -> Result<WordElements> {
        let mut g = Graph::new();
        let b = self.params.bind(&mut g);
        let x = g.leaf(features.clone());
        let c = self.forward(&mut g, &b, x)?;
        Ok(WordElements(g.value(c).clone()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconNet {
    config: MapperConfig,
    params: ParamStore,
    block: ConvBlock,
}

impl ReconNet {
    pub fn new(config: MapperConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stage_rng(config.seed, Stage::Reconstruction);
        let mut params = ParamStore::new();
        let block = ConvBlock::init(&mut params, &mut rng, "rec.", &config, config.coords, config.hidden);
        Ok(Self {
            config,
            params,
            block,
        })
    }

    pub fn from_params(config: MapperConfig, stored: &ParamStore) -> Result<Self> {
        let mut net = Self::new(config)?;
        restore(&mut net.params, stored)?;
        Ok(net)
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn forward(&self, g: &mut Graph, b: &Bound, coords: Var) -> Result<Var> {
        self.block.forward(g, b, coords)
    }

    pub fn reconstruct(&self, elements: &WordElements) -> Result<Tensor2> {
        let mut g = Graph::new();
        let b = self.params.bind(&mut g);
        let x = g.leaf(elements.0.clone());
        let r = self.forward(&mut g, &b, x)?;
        Ok(g.value(r).clone())
    }
}

/// `(cos(c_i, c_j) - M_S[i][j])²` for every pair of positions.
pub fn alignment_indicator(elements: &WordElements, assoc: &AssocMatrix) -> Result<Tensor2> {
    let mut g = Graph::new();
    let c = g.leaf(elements.0.clone());
    let ind = indicator_graph(&mut g, c, assoc)?;
    Ok(g.value(ind).clone())
}

fn indicator_graph(g: &mut Graph, c: Var, assoc: &AssocMatrix) -> Result<Var> {
    let d = g.value(c).rows();
    if assoc.len() != d {
        return Err(Error::Shape {
            op: "alignment_indicator",
            expected: (d, d),
            found: assoc.as_tensor().shape(),
        });
    }
    let cos = g.cosine(c, c)?;
    let target = g.leaf(assoc.as_tensor().clone());
    let diff = g.sub(cos, target)?;
    g.mul(diff, diff)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MapperLoss {
    pub total: f64,
    pub alignment: f64,
    pub reconstruction: f64,
}

/// Loss terms from already computed values.
pub fn mapper_loss(
    elements: &WordElements,
    assoc: &AssocMatrix,
    recon: &Tensor2,
    features: &Tensor2,
) -> Result<MapperLoss> {
    let mut g = Graph::new();
    let c = g.leaf(elements.0.clone());
    let r = g.leaf(recon.clone());
    let f = g.leaf(features.clone());
    let (total, lms, lrec) = loss_terms(&mut g, c, assoc, r, f)?;
    Ok(MapperLoss {
        total: g.value(total).item(),
        alignment: g.value(lms).item(),
        reconstruction: g.value(lrec).item(),
    })
}

fn loss_terms(g: &mut Graph, c: Var, assoc: &AssocMatrix, recon: Var, features: Var) -> Result<(Var, Var, Var)> {
    let ind = indicator_graph(g, c, assoc)?;
    let lms = g.mean(ind)?;
    let lrec = g.mae(recon, features)?;
    let total = g.add(lms, lrec)?;
    Ok((total, lms, lrec))
}

/// Builds the full differentiable mapper objective for one sentence.
pub fn mapper_loss_graph(
    g: &mut Graph,
    net: &MapperNet,
    net_bound: &Bound,
    rnet: &ReconNet,
    rnet_bound: &Bound,
    features: &Tensor2,
    assoc: &AssocMatrix,
) -> Result<(Var, Var, Var)> {
    let f = g.leaf(features.clone());
    let c = net.forward(g, net_bound, f)?;
    let r = rnet.forward(g, rnet_bound, c)?;
    loss_terms(g, c, assoc, r, f)
}

/// One training sentence: its features and sampled association targets.
#[derive(Clone, Debug, PartialEq)]
pub struct MapperSample {
    pub id: u64,
    pub features: Tensor2,
    pub assoc: AssocMatrix,
}

impl MapperSample {
    pub fn new(id: u64, features: Tensor2, net: &AssocNetwork, sentence: &Sentence) -> Result<Self> {
        if features.rows() != sentence.len() {
            return Err(Error::Shape {
                op: "MapperSample",
                expected: (sentence.len(), features.cols()),
                found: features.shape(),
            });
        }
        Ok(Self {
            id,
            features,
            assoc: net.sample(sentence)?,
        })
    }
}

/// Trains both networks sentence by sentence, in order, for `epochs` passes.
/// Returns the mean loss terms of every epoch.
pub fn train_mapper(
    net: &mut MapperNet,
    rnet: &mut ReconNet,
    samples: &[MapperSample],
    epochs: usize,
    lr: f64,
) -> Result<Vec<MapperLoss>> {
    if samples.is_empty() {
        return Err(Error::Empty("mapper training set"));
    }
    if net.config != rnet.config {
        return Err(Error::Invalid("mapping and reconstruction configs differ".into()));
    }
    let mut opt = Adam::new(&net.params, lr);
    let mut ropt = Adam::new(&rnet.params, lr);
    let mut trace = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let mut sum = MapperLoss::default();
        for s in samples {
            let mut g = Graph::new();
            let nb = net.params.bind(&mut g);
            let rb = rnet.params.bind(&mut g);
            let (total, lms, lrec) = mapper_loss_graph(&mut g, net, &nb, rnet, &rb, &s.features, &s.assoc)?;
            let tv = g.value(total).item();
            if !tv.is_finite() {
                return Err(Error::NonFinite(format!("mapper loss on sentence {}", s.id)));
            }
            sum.total += tv;
            sum.alignment += g.value(lms).item();
            sum.reconstruction += g.value(lrec).item();
            let grads = g.backward(total).map_err(|e| annotate(e, s.id))?;
            net.params.accumulate(&grads, &nb);
            rnet.params.accumulate(&grads, &rb);
            opt.step(&mut net.params).map_err(|e| annotate(e, s.id))?;
            ropt.step(&mut rnet.params).map_err(|e| annotate(e, s.id))?;
        }
        let n = samples.len() as f64;
        trace.push(MapperLoss {
            total: sum.total / n,
            alignment: sum.alignment / n,
            reconstruction: sum.reconstruction / n,
        });
    }
    Ok(trace)
}

fn annotate(e: Error, id: u64) -> Error {
    match e {
        Error::NonFinite(m) => Error::NonFinite(format!("{m} (sentence {id})")),
        other => other,
    }
}
