//! Latent Dirichlet allocation trained by collapsed Gibbs sampling.
//!
//! Documents are visited in `(doc_id, kind)` order and every document owns its
//! own random stream ([`crate::rng`]), so a model is a pure function of the
//! corpus contents, the configuration and the seed.

mod persist;

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use persist::{read_binary, write_binary, BINARY_MAGIC};

use crate::corpus::{Document, Vocabulary};
use crate::rng::{stream_id, stream_rng, StreamRng};
use crate::{Error, Result};

/// Number of terms that describe a concept.
pub const TOP_TERMS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k: usize,
    /// Symmetric document-concept prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    /// Symmetric concept-term prior.
    pub beta: f64,
    /// Total Gibbs sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    /// Sweeps between two retained samples after burn-in.
    pub sample_lag: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        TrainConfig {
            k,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 200,
            sample_lag: 10,
            seed,
        }
    }

    pub fn resolved_alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("number of concepts must be at least 1"));
        }
        if !(self.resolved_alpha() > 0.0 && self.beta > 0.0) {
            return Err(Error::invalid("priors must be positive"));
        }
        if self.iterations == 0 || self.sample_lag == 0 {
            return Err(Error::invalid("iterations and sample lag must be positive"));
        }
        Ok(())
    }
}

/// A trained topic model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    config: TrainConfig,
    alpha: f64,
    terms: Vec<String>,
    /// K rows of V term probabilities.
    phi: Vec<Vec<f64>>,
}

impl LdaModel {
    /// Assembles a model from its parts, checking that every row of `phi` is a
    /// strictly positive distribution over `terms`.
    pub fn from_parts(terms: Vec<String>, phi: Vec<Vec<f64>>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if phi.len() != config.k {
            return Err(Error::invalid(format!("phi has {} rows, expected {}", phi.len(), config.k)));
        }
        for (k, row) in phi.iter().enumerate() {
            if row.len() != terms.len() {
                return Err(Error::invalid(format!("phi row {k} has {} entries, expected {}", row.len(), terms.len())));
            }
            if row.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
                return Err(Error::invalid(format!("phi row {k} has an entry outside (0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("phi row {k} sums to {sum}")));
            }
        }
        Ok(LdaModel {
            alpha: config.resolved_alpha(),
            config,
            terms,
            phi,
        })
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.config.beta
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    /// Checks that the model was trained over exactly this vocabulary.
    pub fn check_vocabulary(&self, vocabulary: &Vocabulary) -> Result<()> {
        if self.terms.as_slice() != vocabulary.terms() {
            return Err(Error::VocabularyMismatch(format!(
                "model has {} terms, vocabulary has {} (or the terms differ)",
                self.terms.len(),
                vocabulary.len()
            )));
        }
        Ok(())
    }
}

/// Per-document concept weights, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub doc_id: String,
    pub weights: Vec<f64>,
}

impl WeightVector {
    /// Index of the largest weight; ties go to the smaller concept id.
    pub fn strongest(&self) -> usize {
        argmax(&self.weights)
    }
}

/// First index of the maximum value.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConceptTermList {
    pub concept_id: usize,
    /// (term, probability), most probable first.
    pub terms: Vec<(String, f64)>,
}

fn doc_stream(doc: &Document) -> u64 {
    stream_id(&format!("{}:{}", doc.kind, doc.doc_id))
}

fn sample_index(rng: &mut StreamRng, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("at least one concept");
    let u = rng.random::<f64>() * total;
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}

/// Trains a model over `documents`, whose tokens index `vocabulary`.
///
/// phi is the average of `(n_kw + beta) / (n_k + V beta)` over the samples
/// retained every `sample_lag` sweeps after burn-in (the final state if no
/// sample falls in range).
pub fn train_lda(documents: &[Document], vocabulary: &Vocabulary, config: &TrainConfig) -> Result<LdaModel> {
    config.validate()?;
    let k = config.k;
    let v = vocabulary.len();
    let alpha = config.resolved_alpha();
    let beta = config.beta;
    let v_beta = v as f64 * beta;

    let mut docs: Vec<&Document> = documents.iter().filter(|d| !d.is_empty()).collect();
    if docs.is_empty() {
        return Err(Error::invalid("cannot train on an empty corpus"));
    }
    docs.sort_by(|a, b| (&a.doc_id, a.kind).cmp(&(&b.doc_id, b.kind)));
    let mut distinct = BTreeSet::new();
    for doc in &docs {
        for &t in &doc.tokens {
            if t >= v {
                return Err(Error::VocabularyMismatch(format!(
                    "document {} has term index {t} outside a vocabulary of {v}",
                    doc.doc_id
                )));
            }
            distinct.insert(t);
        }
    }
    if k > distinct.len() {
        return Err(Error::invalid(format!(
            "{k} concepts requested but the corpus has only {} distinct terms",
            distinct.len()
        )));
    }

    // Counts: n_wk is term-major so one token's K entries are contiguous.
    let mut n_wk = vec![0u32; v * k];
    let mut n_k = vec![0u32; k];
    let mut n_dk: Vec<Vec<u32>> = vec![vec![0; k]; docs.len()];
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    let mut rngs: Vec<StreamRng> = docs.iter().map(|d| stream_rng(config.seed, doc_stream(d))).collect();

    for (d, doc) in docs.iter().enumerate() {
        let rng = &mut rngs[d];
        let assignments: Vec<usize> = doc.tokens.iter().map(|_| rng.random_range(0..k)).collect();
        for (&w, &topic) in doc.tokens.iter().zip(&assignments) {
            n_wk[w * k + topic] += 1;
            n_k[topic] += 1;
            n_dk[d][topic] += 1;
        }
        z.push(assignments);
    }

    let mut cumulative = vec![0.0; k];
    let mut phi_acc = vec![vec![0.0; v]; k];
    let mut samples = 0usize;
    for sweep in 1..=config.iterations {
        for (d, doc) in docs.iter().enumerate() {
            let rng = &mut rngs[d];
            let doc_topics = &mut n_dk[d];
            for (i, &w) in doc.tokens.iter().enumerate() {
                let old = z[d][i];
                n_wk[w * k + old] -= 1;
                n_k[old] -= 1;
                doc_topics[old] -= 1;

                let row = &n_wk[w * k..(w + 1) * k];
                let mut acc = 0.0;
                for t in 0..k {
                    acc += (f64::from(doc_topics[t]) + alpha) * (f64::from(row[t]) + beta)
                        / (f64::from(n_k[t]) + v_beta);
                    cumulative[t] = acc;
                }
                let new = sample_index(rng, &cumulative);

                z[d][i] = new;
                n_wk[w * k + new] += 1;
                n_k[new] += 1;
                doc_topics[new] += 1;
            }
        }
        if sweep > config.burn_in && (sweep - config.burn_in).is_multiple_of(config.sample_lag) {
            accumulate_phi(&mut phi_acc, &n_wk, &n_k, beta, v_beta);
            samples += 1;
        }
    }
    if samples == 0 {
        accumulate_phi(&mut phi_acc, &n_wk, &n_k, beta, v_beta);
        samples = 1;
    }
    for row in &mut phi_acc {
        for p in row.iter_mut() {
            *p /= samples as f64;
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= sum);
    }
    log::debug!("trained K={k} over {} documents, {samples} samples", docs.len());
    LdaModel::from_parts(vocabulary.terms().to_vec(), phi_acc, *config)
}

fn accumulate_phi(phi: &mut [Vec<f64>], n_wk: &[u32], n_k: &[u32], beta: f64, v_beta: f64) {
    let k = n_k.len();
    for (t, row) in phi.iter_mut().enumerate() {
        let denom = f64::from(n_k[t]) + v_beta;
        for (w, p) in row.iter_mut().enumerate() {
            *p += (f64::from(n_wk[w * k + t]) + beta) / denom;
        }
    }
}

/// Estimates the concept weights of one document with phi held fixed.
///
/// Fold-in Gibbs sampling over the document's tokens; the weights are
/// `(n_dk + alpha) / (N + K alpha)` averaged over the second half of the
/// sweeps. Documents without tokens get the uniform prior.
pub fn infer_document(model: &LdaModel, document: &Document, fold_in_iterations: usize, seed: u64) -> Result<WeightVector> {
    let k = model.k();
    let alpha = model.alpha();
    if let Some(&bad) = document.tokens.iter().find(|&&t| t >= model.vocab_size()) {
        return Err(Error::VocabularyMismatch(format!(
            "document {} has term index {bad} outside the model vocabulary of {}",
            document.doc_id,
            model.vocab_size()
        )));
    }
    let n = document.tokens.len();
    if n == 0 {
        return Ok(WeightVector {
            doc_id: document.doc_id.clone(),
            weights: vec![1.0 / k as f64; k],
        });
    }

    let phi = model.phi();
    let mut rng = stream_rng(seed, doc_stream(document));
    let mut cumulative = vec![0.0; k];
    let mut n_dk = vec![0u32; k];
    let mut z = Vec::with_capacity(n);
    for &w in &document.tokens {
        let mut acc = 0.0;
        for t in 0..k {
            acc += phi[t][w];
            cumulative[t] = acc;
        }
        let topic = sample_index(&mut rng, &cumulative);
        n_dk[topic] += 1;
        z.push(topic);
    }

    let denom = n as f64 + k as f64 * alpha;
    let mut acc_weights = vec![0.0; k];
    let mut samples = 0usize;
    let keep_from = fold_in_iterations / 2;
    for sweep in 0..fold_in_iterations {
        for (i, &w) in document.tokens.iter().enumerate() {
            n_dk[z[i]] -= 1;
            let mut acc = 0.0;
            for t in 0..k {
                acc += (f64::from(n_dk[t]) + alpha) * phi[t][w];
                cumulative[t] = acc;
            }
            let topic = sample_index(&mut rng, &cumulative);
            z[i] = topic;
            n_dk[topic] += 1;
        }
        if sweep >= keep_from {
            for t in 0..k {
                acc_weights[t] += (f64::from(n_dk[t]) + alpha) / denom;
            }
            samples += 1;
        }
    }
    if samples == 0 {
        for t in 0..k {
            acc_weights[t] = (f64::from(n_dk[t]) + alpha) / denom;
        }
        samples = 1;
    }
    let mut weights: Vec<f64> = acc_weights.into_iter().map(|w| w / samples as f64).collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(WeightVector {
        doc_id: document.doc_id.clone(),
        weights,
    })
}

/// Indices of the `n` most probable terms of a concept; ties by ascending
/// term index.
pub fn top_term_indices(model: &LdaModel, concept_id: usize, n: usize) -> Result<Vec<usize>> {
    let row = model
        .phi
        .get(concept_id)
        .ok_or_else(|| Error::invalid(format!("concept {concept_id} out of range for K={}", model.k())))?;
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(n);
    Ok(idx)
}

pub fn top_terms(model: &LdaModel, concept_id: usize, n: usize) -> Result<ConceptTermList> {
    let idx = top_term_indices(model, concept_id, n)?;
    Ok(ConceptTermList {
        concept_id,
        terms: idx
            .into_iter()
            .map(|i| (model.terms[i].clone(), model.phi[concept_id][i]))
            .collect(),
    })
}
