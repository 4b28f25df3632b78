//! From-scratch random forest: one binary model per track role.
//!
//! Determinism contract: each tree derives its own RNG stream from the
//! forest seed and tree index, so parallel and sequential training build
//! identical models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::classify::features::{FeatureVector, FEATURE_COUNT};
use crate::classify::Role;
use crate::error::ClassifyError;

const MODEL_MAGIC: &[u8; 4] = b"HFOR";
const MODEL_VERSION: u16 = 1;

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: 12, min_leaf: 2, seed: 42 }
    }
}

/// Arena node; children always follow their parent in the vector.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: u32, right: u32 },
    Leaf { p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Probability at the leaf this vector falls into.
    pub fn predict(&self, values: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { p } => return *p,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if values[*feature] <= *threshold { *left as usize } else { *right as usize };
                }
            }
        }
    }
}

/// A trained one-vs-rest forest for a single role.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub role: Role,
    pub n_features: usize,
    pub params: ForestParams,
    pub trees: Vec<Tree>,
}

fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    // splitmix64 of the xored index decorrelates neighboring streams.
    let mut z = seed ^ (tree_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct TreeBuilder<'a> {
    features: &'a [FeatureVector],
    labels: &'a [bool],
    params: ForestParams,
    candidates_per_split: usize,
    nodes: Vec<TreeNode>,
}

impl<'a> TreeBuilder<'a> {
    fn leaf(&mut self, samples: &[usize]) -> u32 {
        let pos = samples.iter().filter(|i| self.labels[**i]).count();
        self.nodes.push(TreeNode::Leaf { p: pos as f64 / samples.len() as f64 });
        (self.nodes.len() - 1) as u32
    }

    fn build(&mut self, samples: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let pos = samples.iter().filter(|i| self.labels[**i]).count();
        let impurity = gini(pos, samples.len());
        if depth >= self.params.max_depth
            || samples.len() < 2 * self.params.min_leaf
            || pos == 0
            || pos == samples.len()
        {
            return self.leaf(samples);
        }

        // Partial Fisher-Yates draw of distinct candidate feature indices.
        let mut pool: Vec<usize> = (0..FEATURE_COUNT).collect();
        for i in 0..self.candidates_per_split {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        let candidates = &pool[..self.candidates_per_split];

        let mut best: Option<(f64, usize, f64)> = None;
        for &feature in candidates {
            let mut values: Vec<f64> = samples.iter().map(|i| self.features[*i].values[feature]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for pair in values.windows(2) {
                let threshold = (pair[0] + pair[1]) / 2.0;
                let (mut lp, mut ln, mut rp, mut rn) = (0usize, 0usize, 0usize, 0usize);
                for &i in samples {
                    let is_pos = self.labels[i];
                    if self.features[i].values[feature] <= threshold {
                        if is_pos {
                            lp += 1;
                        } else {
                            ln += 1;
                        }
                    } else if is_pos {
                        rp += 1;
                    } else {
                        rn += 1;
                    }
                }
                let (l, r) = (lp + ln, rp + rn);
                if l < self.params.min_leaf || r < self.params.min_leaf {
                    continue;
                }
                let weighted = (l as f64 * gini(lp, l) + r as f64 * gini(rp, r))
                    / samples.len() as f64;
                if weighted < impurity && best.map(|b| weighted < b.0).unwrap_or(true) {
                    best = Some((weighted, feature, threshold));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return self.leaf(samples);
        };
        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|i| self.features[**i].values[feature] <= threshold);

        let at = self.nodes.len();
        self.nodes.push(TreeNode::Split { feature, threshold, left: 0, right: 0 });
        let left = self.build(&left_samples, depth + 1, rng);
        let right = self.build(&right_samples, depth + 1, rng);
        self.nodes[at] = TreeNode::Split { feature, threshold, left, right };
        at as u32
    }
}

/// One tree plus its bootstrap membership mask.
fn grow_tree(
    features: &[FeatureVector],
    labels: &[bool],
    params: ForestParams,
    tree_index: usize,
) -> (Tree, Vec<bool>) {
    let n = labels.len();
    let mut rng = tree_rng(params.seed, tree_index);
    let mut in_bag = vec![false; n];
    let samples: Vec<usize> = (0..n)
        .map(|_| {
            let i = rng.gen_range(0..n);
            in_bag[i] = true;
            i
        })
        .collect();
    let candidates = (FEATURE_COUNT as f64).sqrt().floor() as usize;
    let mut builder = TreeBuilder {
        features,
        labels,
        params,
        candidates_per_split: candidates.max(1),
        nodes: Vec::new(),
    };
    builder.build(&samples, 0, &mut rng);
    (Tree { nodes: builder.nodes }, in_bag)
}

fn check_two_classes(labels: &[bool]) -> Result<(), ClassifyError> {
    let pos = labels.iter().filter(|l| **l).count();
    if pos == 0 || pos == labels.len() {
        return Err(ClassifyError::DegenerateData(
            "training data must contain both positive and negative examples",
        ));
    }
    Ok(())
}

fn grow_all(
    features: &[FeatureVector],
    labels: &[bool],
    params: ForestParams,
) -> Vec<(Tree, Vec<bool>)> {
    #[cfg(feature = "parallel")]
    {
        (0..params.n_trees)
            .into_par_iter()
            .map(|t| grow_tree(features, labels, params, t))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..params.n_trees).map(|t| grow_tree(features, labels, params, t)).collect()
    }
}

/// Trains a forest for `role`, using the default thread pool when the
/// `parallel` feature is on.
pub fn train_forest(
    features: &[FeatureVector],
    labels: &[bool],
    role: Role,
    params: ForestParams,
) -> Result<ForestModel, ClassifyError> {
    check_two_classes(labels)?;
    let trees = grow_all(features, labels, params).into_iter().map(|(t, _)| t).collect();
    Ok(ForestModel { role, n_features: FEATURE_COUNT, params, trees })
}

/// Single-threaded variant of `train_forest`; always available and
/// bit-identical to the parallel result.
pub fn train_forest_seq(
    features: &[FeatureVector],
    labels: &[bool],
    role: Role,
    params: ForestParams,
) -> Result<ForestModel, ClassifyError> {
    check_two_classes(labels)?;
    let trees = (0..params.n_trees)
        .map(|t| grow_tree(features, labels, params, t).0)
        .collect();
    Ok(ForestModel { role, n_features: FEATURE_COUNT, params, trees })
}

/// Out-of-bag accuracy of the forest the same data and params would train:
/// each sample is voted on only by trees whose bootstrap missed it.
pub fn oob_accuracy(
    features: &[FeatureVector],
    labels: &[bool],
    role: Role,
    params: ForestParams,
) -> Result<f64, ClassifyError> {
    check_two_classes(labels)?;
    let _ = role;
    let grown = grow_all(features, labels, params);
    let (mut hits, mut voted) = (0usize, 0usize);
    for (i, label) in labels.iter().enumerate() {
        let (mut sum, mut n) = (0.0, 0usize);
        for (tree, in_bag) in &grown {
            if !in_bag[i] {
                sum += tree.predict(&features[i].values);
                n += 1;
            }
        }
        if n > 0 {
            voted += 1;
            if (sum / n as f64 > 0.5) == *label {
                hits += 1;
            }
        }
    }
    if voted == 0 {
        return Err(ClassifyError::DegenerateData("no out-of-bag votes; too few trees"));
    }
    Ok(hits as f64 / voted as f64)
}

/// Mean of the per-tree leaf probabilities, in tree order.
pub fn predict(model: &ForestModel, fv: &FeatureVector) -> Result<f64, ClassifyError> {
    if model.n_features != FEATURE_COUNT {
        return Err(ClassifyError::DimensionMismatch {
            want: model.n_features,
            got: FEATURE_COUNT,
        });
    }
    let sum: f64 = model.trees.iter().map(|t| t.predict(&fv.values)).sum();
    Ok(sum / model.trees.len() as f64)
}

/// Serializes a model to the versioned HFOR byte format.
pub fn save_model(model: &ForestModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.push(model.role as u8);
    out.extend_from_slice(&(model.n_features as u32).to_le_bytes());
    out.extend_from_slice(&(model.trees.len() as u32).to_le_bytes());
    out.extend_from_slice(&(model.params.max_depth as u32).to_le_bytes());
    out.extend_from_slice(&(model.params.min_leaf as u32).to_le_bytes());
    out.extend_from_slice(&model.params.seed.to_le_bytes());
    for tree in &model.trees {
        out.extend_from_slice(&(tree.nodes.len() as u32).to_le_bytes());
        for node in &tree.nodes {
            match node {
                TreeNode::Leaf { p } => {
                    out.push(0);
                    out.extend_from_slice(&p.to_le_bytes());
                }
                TreeNode::Split { feature, threshold, left, right } => {
                    out.push(1);
                    out.extend_from_slice(&(*feature as u32).to_le_bytes());
                    out.extend_from_slice(&threshold.to_le_bytes());
                    out.extend_from_slice(&left.to_le_bytes());
                    out.extend_from_slice(&right.to_le_bytes());
                }
            }
        }
    }
    out
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifyError> {
        if self.pos + n > self.bytes.len() {
            return Err(ClassifyError::BadModelFile("truncated model file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ClassifyError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ClassifyError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ClassifyError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ClassifyError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ClassifyError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses and validates an HFOR byte buffer.
pub fn load_model(bytes: &[u8]) -> Result<ForestModel, ClassifyError> {
    let mut r = ByteReader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(ClassifyError::BadModelFile("bad magic bytes".into()));
    }
    let version = r.u16()?;
    if version != MODEL_VERSION {
        return Err(ClassifyError::BadModelFile(format!("unsupported version {version}")));
    }
    let role = Role::from_byte(r.u8()?)
        .ok_or_else(|| ClassifyError::BadModelFile("unknown role byte".into()))?;
    let n_features = r.u32()? as usize;
    let n_trees = r.u32()? as usize;
    let max_depth = r.u32()? as usize;
    let min_leaf = r.u32()? as usize;
    let seed = r.u64()?;
    let mut trees = Vec::with_capacity(n_trees.min(1 << 20));
    for _ in 0..n_trees {
        let node_count = r.u32()? as usize;
        if node_count == 0 {
            return Err(ClassifyError::BadModelFile("tree with no nodes".into()));
        }
        let mut nodes = Vec::with_capacity(node_count.min(1 << 24));
        for _ in 0..node_count {
            let node = match r.u8()? {
                0 => {
                    let p = r.f64()?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(ClassifyError::BadModelFile("leaf probability out of range".into()));
                    }
                    TreeNode::Leaf { p }
                }
                1 => {
                    let feature = r.u32()? as usize;
                    let threshold = r.f64()?;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    if feature >= n_features {
                        return Err(ClassifyError::BadModelFile("split feature out of range".into()));
                    }
                    if left as usize >= node_count || right as usize >= node_count {
                        return Err(ClassifyError::BadModelFile("child index out of range".into()));
                    }
                    if !threshold.is_finite() {
                        return Err(ClassifyError::BadModelFile("non-finite threshold".into()));
                    }
                    TreeNode::Split { feature, threshold, left, right }
                }
                t => return Err(ClassifyError::BadModelFile(format!("unknown node tag {t}"))),
            };
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    if r.pos != bytes.len() {
        return Err(ClassifyError::BadModelFile("trailing bytes after model data".into()));
    }
    Ok(ForestModel {
        role,
        n_features,
        params: ForestParams { n_trees, max_depth, min_leaf, seed },
        trees,
    })
}
