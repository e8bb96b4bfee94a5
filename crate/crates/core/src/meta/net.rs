//! Feature-interaction regression over binary metadata.
//!
//! Each feature's name is embedded with pretrained word vectors and signed
//! by its value (+1 present, −1 absent). A shared affine+ReLU reducer maps
//! every row to `D` dims and rows are L2-normalized, giving the low-order
//! features `F_low` (M×D). Their pairwise cosine matrix `F_low·F_lowᵀ`
//! (M×M) is flattened and passed through a ReLU stack to form the
//! high-order features. Low- and high-order features are concatenated and
//! regressed through an MLP with a sigmoid output in `[0, 1]`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingTable;
use crate::autodiff::{block_gram, init_mlp, l2_normalize_rows, Adam, Graph, Matrix, NodeId, ParamSet};
use crate::checkpoint::Checkpoint;
use crate::data::{MetadataRecord, CSV_HEADERS};
use crate::error::{Error, Result};
use crate::metrics::rmse;
use crate::rng::SeededRng;
use crate::training::{EpochStats, TrainOutcome};

pub const CHECKPOINT_KIND: &str = "meta-net";
const PHRASES_PARAM: &str = "embedding.phrases";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaNetConfig {
    /// Number of metadata features (M).
    pub features: usize,
    /// Reduced per-feature dimension (D).
    pub reduced_dim: usize,
    pub interaction_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// When false the high-order block is replaced by zeros (ablation).
    pub use_interactions: bool,
}

impl Default for MetaNetConfig {
    fn default() -> Self {
        Self {
            features: CSV_HEADERS.len(),
            reduced_dim: 8,
            interaction_hidden: vec![64],
            head_hidden: vec![64],
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 40,
            seed: 0,
            use_interactions: true,
        }
    }
}

impl MetaNetConfig {
    pub fn validate(&self) -> Result<()> {
        let widths_ok = self.interaction_hidden.iter().chain(&self.head_hidden).all(|&w| w > 0);
        if self.features == 0 || self.reduced_dim == 0 || !widths_ok {
            return Err(Error::contract("meta-net dimensions must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::contract("meta-net epochs, batch size and learning rate must be positive"));
        }
        Ok(())
    }

    fn interaction_widths(&self) -> Vec<usize> {
        let m2 = self.features * self.features;
        let mut w = vec![m2];
        w.extend(&self.interaction_hidden);
        w.push(m2);
        w
    }

    fn head_widths(&self) -> Vec<usize> {
        let mut w = vec![self.features * self.reduced_dim + self.features * self.features];
        w.extend(&self.head_hidden);
        w.push(1);
        w
    }
}

/// `F_low`: one unit-norm row per feature, or a zero row listed in
/// `degenerate_rows`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowOrderFeatures {
    pub matrix: Matrix,
    pub degenerate_rows: Vec<usize>,
}

/// `F_high = F_low · F_lowᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionMatrix {
    pub matrix: Matrix,
}

/// Row `i` is the phrase vector of feature `i` scaled by `2·v_i − 1`.
pub fn embed_features(features: &[u8], phrase_vectors: &Matrix) -> Result<Matrix> {
    if features.len() != phrase_vectors.rows() {
        return Err(Error::dim(
            "embed",
            format!("{} features for {} phrases", features.len(), phrase_vectors.rows()),
        ));
    }
    let mut out = phrase_vectors.clone();
    for (i, &v) in features.iter().enumerate() {
        if v > 1 {
            return Err(Error::contract(format!("feature {i} is {v}, expected 0 or 1")));
        }
        if v == 0 {
            out.row_mut(i).iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(out)
}

pub fn embed_record<S: AsRef<str>>(
    record: &MetadataRecord,
    table: &EmbeddingTable,
    schema: &[S],
) -> Result<Matrix> {
    embed_features(&record.features, &table.phrase_matrix(schema)?)
}

/// Applies the shared reducer and row normalization.
pub fn reduce_and_normalize(embedded: &Matrix, params: &ParamSet) -> Result<LowOrderFeatures> {
    let (w, b) = reducer(params)?;
    let mut h = embedded.matmul(w)?;
    if b.shape() != (1, h.cols()) {
        return Err(Error::dim("reduce", "bias width differs from reducer output"));
    }
    for r in 0..h.rows() {
        for (v, bias) in h.row_mut(r).iter_mut().zip(b.data()) {
            *v = (*v + bias).max(0.0);
        }
    }
    let (matrix, degenerate_rows) = l2_normalize_rows(&h);
    Ok(LowOrderFeatures {
        matrix,
        degenerate_rows,
    })
}

pub fn interact(f_low: &LowOrderFeatures) -> InteractionMatrix {
    let m = f_low.matrix.rows();
    let flat = block_gram(&f_low.matrix, m).expect("single block always divides");
    InteractionMatrix {
        matrix: flat.with_shape(m, m).expect("m*m entries"),
    }
}

fn reducer(params: &ParamSet) -> Result<(&Matrix, &Matrix)> {
    let w = params
        .get("reducer.w0")
        .ok_or_else(|| Error::MissingBinding("reducer.w0".into()))?;
    let b = params
        .get("reducer.b0")
        .ok_or_else(|| Error::MissingBinding("reducer.b0".into()))?;
    Ok((w, b))
}

fn append_mlp(g: &mut Graph, mut x: NodeId, prefix: &str, layers: usize, relu_last: bool) -> NodeId {
    for i in 0..layers {
        x = g.dense(x, &format!("{prefix}.w{i}"), &format!("{prefix}.b{i}"));
        if i + 1 < layers || relu_last {
            x = g.relu(x);
        }
    }
    x
}

/// Graph handles for one batch.
pub struct MetaGraph {
    pub graph: Graph,
    pub low: NodeId,
    pub gram: Option<NodeId>,
    pub prediction: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaNet {
    pub config: MetaNetConfig,
    pub phrases: Vec<String>,
    /// M×E phrase vectors, frozen.
    pub phrase_vectors: Matrix,
    pub params: ParamSet,
}

impl MetaNet {
    /// Fresh network for `schema` (one phrase per feature).
    pub fn new<S: AsRef<str>>(config: MetaNetConfig, table: &EmbeddingTable, schema: &[S]) -> Result<Self> {
        let phrase_vectors = table.phrase_matrix(schema)?;
        let phrases = schema.iter().map(|s| s.as_ref().to_string()).collect();
        Self::with_phrase_vectors(config, phrases, phrase_vectors)
    }

    pub fn with_phrase_vectors(config: MetaNetConfig, phrases: Vec<String>, phrase_vectors: Matrix) -> Result<Self> {
        config.validate()?;
        if phrase_vectors.rows() != config.features || phrases.len() != config.features {
            return Err(Error::dim(
                "meta-net",
                format!("{} phrases for {} features", phrase_vectors.rows(), config.features),
            ));
        }
        let mut rng = SeededRng::new(config.seed);
        let mut params = init_mlp("reducer", &[phrase_vectors.cols(), config.reduced_dim], &mut rng);
        params.extend(init_mlp("interaction", &config.interaction_widths(), &mut rng));
        params.extend(init_mlp("head", &config.head_widths(), &mut rng));
        Ok(Self {
            config,
            phrases,
            phrase_vectors,
            params,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.phrase_vectors.cols()
    }

    fn embed_batch(&self, batch: &[&[u8]]) -> Result<Matrix> {
        let m = self.config.features;
        let e = self.embedding_dim();
        let mut data = Vec::with_capacity(batch.len() * m * e);
        for features in batch {
            data.extend(embed_features(features, &self.phrase_vectors)?.into_data());
        }
        Matrix::new(batch.len() * m, e, data)
    }

    /// Builds the forward graph for a batch of feature vectors; the
    /// prediction node is `B×1` in `[0, 1]`.
    pub fn build(&self, batch: &[&[u8]]) -> Result<MetaGraph> {
        if batch.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        let cfg = &self.config;
        let m = cfg.features;
        let mut g = Graph::new();
        let x = g.constant(self.embed_batch(batch)?);
        let reduced = g.dense(x, "reducer.w0", "reducer.b0");
        let reduced = g.relu(reduced);
        let low = g.l2norm_rows(reduced);
        let low_flat = g.reshape(low, m * cfg.reduced_dim);

        let (gram, high) = if cfg.use_interactions {
            let gram = g.block_gram(low, m);
            let layers = cfg.interaction_hidden.len() + 1;
            (Some(gram), append_mlp(&mut g, gram, "interaction", layers, true))
        } else {
            (None, g.constant(Matrix::zeros(batch.len(), m * m)))
        };

        let joined = g.concat(&[low_flat, high]);
        let logit = append_mlp(&mut g, joined, "head", cfg.head_hidden.len() + 1, false);
        let prediction = g.sigmoid(logit);
        Ok(MetaGraph {
            graph: g,
            low,
            gram,
            prediction,
        })
    }

    /// RMSE of the batch predictions against `targets` in `[0, 1]`.
    pub fn loss_graph(&self, batch: &[&[u8]], targets: &[f64]) -> Result<(Graph, NodeId)> {
        if targets.len() != batch.len() {
            return Err(Error::contract("one target per sample required"));
        }
        let mut mg = self.build(batch)?;
        let g = &mut mg.graph;
        let y = g.constant(Matrix::column_vector(targets.to_vec())?);
        let diff = g.sub(mg.prediction, y);
        let sq = g.square(diff);
        let mse = g.mean(sq);
        let loss = g.sqrt(mse);
        Ok((mg.graph, loss))
    }

    pub fn predict_features(&self, batch: &[&[u8]]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(256) {
            let mut mg = self.build(chunk)?;
            let p = mg.graph.forward(mg.prediction, &self.params)?;
            out.extend_from_slice(p.data());
        }
        Ok(out)
    }

    /// Predictions in `[0, 1]` for a set of records.
    pub fn predict(&self, records: &[MetadataRecord]) -> Result<Vec<f64>> {
        let batch: Vec<&[u8]> = records.iter().map(|r| &r.features[..]).collect();
        self.predict_features(&batch)
    }

    pub fn forward(&self, record: &MetadataRecord) -> Result<f64> {
        Ok(self.predict(std::slice::from_ref(record))?[0])
    }

    pub fn low_order(&self, features: &[u8]) -> Result<LowOrderFeatures> {
        reduce_and_normalize(&embed_features(features, &self.phrase_vectors)?, &self.params)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut params = self.params.clone();
        params.insert(PHRASES_PARAM, self.phrase_vectors.clone());
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            config: serde_json::json!({ "net": self.config, "phrases": self.phrases }),
            params,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != CHECKPOINT_KIND {
            return Err(Error::Checkpoint(format!("expected {CHECKPOINT_KIND}, found {}", ck.kind)));
        }
        let config: MetaNetConfig = serde_json::from_value(ck.config["net"].clone())?;
        let phrases: Vec<String> = serde_json::from_value(ck.config["phrases"].clone())?;
        let mut params = ck.params.clone();
        let phrase_vectors = params
            .get(PHRASES_PARAM)
            .cloned()
            .ok_or_else(|| Error::Checkpoint("missing phrase vectors".into()))?;
        let fresh = Self::with_phrase_vectors(config, phrases, phrase_vectors)?;
        params.remove(PHRASES_PARAM);
        let params = params.conform_to(&fresh.params)?;
        Ok(Self { params, ..fresh })
    }
}

pub(crate) fn labels_of(records: &[MetadataRecord]) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            r.label()
                .ok_or_else(|| Error::contract(format!("record `{}` has no label", r.id)))
        })
        .collect()
}

/// Mini-batch Adam on RMSE of `[0,1]`-normalized labels. Validation RMSE is
/// tracked every epoch and the best parameters are returned.
pub fn train_meta<S: AsRef<str>>(
    train: &[MetadataRecord],
    val: &[MetadataRecord],
    table: &EmbeddingTable,
    schema: &[S],
    config: &MetaNetConfig,
) -> Result<TrainOutcome<MetaNet>> {
    let net = MetaNet::new(config.clone(), table, schema)?;
    let train_x: Vec<&[u8]> = train.iter().map(|r| &r.features[..]).collect();
    let val_x: Vec<&[u8]> = val.iter().map(|r| &r.features[..]).collect();
    train_meta_features(net, &train_x, &labels_of(train)?, &val_x, &labels_of(val)?)
}

/// Training loop over raw feature vectors with labels on the 0–100 scale.
pub fn train_meta_features(
    mut net: MetaNet,
    train_x: &[&[u8]],
    train_y: &[f64],
    val_x: &[&[u8]],
    val_y: &[f64],
) -> Result<TrainOutcome<MetaNet>> {
    if train_x.is_empty() || val_x.is_empty() {
        return Err(Error::contract("training and validation sets must be non-empty"));
    }
    if train_y.iter().chain(val_y).any(|y| !(0.0..=100.0).contains(y)) {
        return Err(Error::contract("labels must lie in [0, 100]"));
    }
    let cfg = net.config.clone();
    let targets: Vec<f64> = train_y.iter().map(|y| y / 100.0).collect();
    let mut rng = SeededRng::new(cfg.seed).derive(1);
    let mut opt = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_x.len()).collect();

    let mut best = (f64::INFINITY, 0, net.params.clone());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let xb: Vec<&[u8]> = chunk.iter().map(|&i| train_x[i]).collect();
            let yb: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let (mut g, loss) = net.loss_graph(&xb, &yb)?;
            g.forward(loss, &net.params)?;
            let grads = g.backward(loss)?;
            opt.step(&mut net.params, &grads);
        }
        if !net.params.is_finite() {
            return Err(Error::contract(format!("meta-net diverged at epoch {epoch}")));
        }
        let scaled = |p: Vec<f64>| p.into_iter().map(|v| v * 100.0).collect::<Vec<_>>();
        let train_rmse = rmse(&scaled(net.predict_features(train_x)?), train_y)?;
        let val_rmse = rmse(&scaled(net.predict_features(val_x)?), val_y)?;
        history.push(EpochStats { train_rmse, val_rmse });
        if val_rmse < best.0 {
            best = (val_rmse, epoch, net.params.clone());
        }
    }
    let (val_rmse, best_epoch, params) = best;
    net.params = params;
    Ok(TrainOutcome {
        model: net,
        val_rmse,
        best_epoch,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn table(dim: usize, seed: u64) -> EmbeddingTable {
        let mut rng = SeededRng::new(seed);
        let mut t = EmbeddingTable::new(dim);
        for tok in ["subject", "focus", "eyes", "face", "near", "action", "accessory", "group",
                    "collage", "human", "occlusion", "info", "blur"] {
            t.insert(tok, (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        }
        t
    }

    fn record(features: [u8; 12]) -> MetadataRecord {
        MetadataRecord::new("r", features, Some(50))
    }

    #[test]
    fn embedding_signs() {
        let t = table(6, 1);
        let g = t.phrase_matrix(&CSV_HEADERS).unwrap();
        assert_eq!(embed_record(&record([1; 12]), &t, &CSV_HEADERS).unwrap(), g);
        assert_eq!(embed_record(&record([0; 12]), &t, &CSV_HEADERS).unwrap(), g.map(|v| -v));
    }

    #[test]
    fn identity_reducer_keeps_normalized_input() {
        let mut params = ParamSet::new();
        params.insert("reducer.w0", Matrix::identity(3));
        params.insert("reducer.b0", Matrix::zeros(1, 3));
        let x = Matrix::from_rows(&[[0.6, 0.8, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let low = reduce_and_normalize(&x, &params).unwrap();
        assert_eq!(low.matrix, x);
        assert!(low.degenerate_rows.is_empty());
    }

    #[test]
    fn zero_row_is_flagged() {
        let mut params = ParamSet::new();
        params.insert("reducer.w0", Matrix::identity(2));
        params.insert("reducer.b0", Matrix::zeros(1, 2));
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let low = reduce_and_normalize(&x, &params).unwrap();
        assert_eq!(low.degenerate_rows, vec![0]);
        assert_eq!(low.matrix.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn interaction_special_cases() {
        let same = LowOrderFeatures {
            matrix: Matrix::from_rows(&[[0.6, 0.8]; 3]).unwrap(),
            degenerate_rows: vec![],
        };
        assert!(interact(&same).matrix.data().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let axes = LowOrderFeatures {
            matrix: Matrix::identity(4),
            degenerate_rows: vec![],
        };
        assert_eq!(interact(&axes).matrix, Matrix::identity(4));
    }

    #[test]
    fn zero_head_predicts_half() {
        let t = table(6, 2);
        let mut net = MetaNet::new(MetaNetConfig::default(), &t, &CSV_HEADERS).unwrap();
        for (name, m) in net.params.iter_mut() {
            if name.starts_with("head.") {
                m.data_mut().fill(0.0);
            }
        }
        for f in [[0u8; 12], [1; 12], [1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0]] {
            assert_eq!(net.forward(&record(f)).unwrap(), 0.5);
        }
    }

    #[test]
    fn identical_records_identical_predictions() {
        let t = table(6, 3);
        let net = MetaNet::new(MetaNetConfig::default(), &t, &CSV_HEADERS).unwrap();
        let f = [1, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0];
        let p = net.predict(&[record(f), record(f)]).unwrap();
        assert_eq!(p[0], p[1]);
        assert!((0.0..=1.0).contains(&p[0]));
    }

    #[test]
    fn graph_gram_matches_interact() {
        let t = table(6, 4);
        let net = MetaNet::new(MetaNetConfig::default(), &t, &CSV_HEADERS).unwrap();
        let f: [u8; 12] = [1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1];
        let mut mg = net.build(&[&f[..]]).unwrap();
        mg.graph.forward(mg.prediction, &net.params).unwrap();
        let gram = mg.graph.value(mg.gram.unwrap()).unwrap().clone();
        let expect = interact(&net.low_order(&f).unwrap()).matrix;
        assert_eq!(gram.data(), expect.data());
    }

    #[test]
    fn checkpoint_round_trip() {
        let t = table(6, 5);
        let net = MetaNet::new(MetaNetConfig::default(), &t, &CSV_HEADERS).unwrap();
        let back = MetaNet::from_checkpoint(&Checkpoint::read_from(&net.to_checkpoint().to_bytes()[..]).unwrap()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn unlabeled_training_record_is_rejected() {
        let t = table(6, 6);
        let mut r = record([0; 12]);
        r.pawpularity = None;
        let err = train_meta(&[r.clone()], &[r], &t, &CSV_HEADERS, &MetaNetConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }
}
