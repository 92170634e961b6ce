use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    forward_site, linear_baseline_forward, Architecture, FacetSpec, LinearParams, ModelConfig,
    ModelError, ModelParams, PagePrediction, Result, SitePrediction,
};
use crate::corpus::{CleanPage, SiteDocument, Vocabulary};
use crate::embed::EmbeddingTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Cnn(ModelParams),
    Linear(LinearParams),
}

impl Classifier {
    pub fn initial(config: &ModelConfig, d_in: usize, n_classes: usize, rng: &mut ChaCha8Rng) -> Self {
        match config.architecture {
            Architecture::Cnn => Classifier::Cnn(ModelParams::random(
                d_in,
                &config.widths,
                config.filters_per_width,
                n_classes,
                rng,
            )),
            Architecture::Linear => Classifier::Linear(LinearParams::random(d_in, n_classes, rng)),
        }
    }

    pub fn forward(&self, chunks: &[Vec<f64>]) -> Result<Vec<f64>> {
        match self {
            Classifier::Cnn(p) => super::forward_page(chunks, p),
            Classifier::Linear(p) => linear_baseline_forward(chunks, p),
        }
    }

    pub fn values(&self) -> Vec<&[f64]> {
        match self {
            Classifier::Cnn(p) => p.values(),
            Classifier::Linear(p) => p.values(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            Classifier::Cnn(p) => Classifier::Cnn(p.zeros_like()),
            Classifier::Linear(p) => Classifier::Linear(p.zeros_like()),
        }
    }

    fn accumulate_grad(&self, chunks: &[Vec<f64>], targets: &[f64], scale: f64, grad: &mut Self) -> Result<f64> {
        match (self, grad) {
            (Classifier::Cnn(p), Classifier::Cnn(g)) => p.accumulate_grad(chunks, targets, scale, g),
            (Classifier::Linear(p), Classifier::Linear(g)) => p.accumulate_grad(chunks, targets, scale, g),
            _ => unreachable!("gradient buffer built with zeros_like"),
        }
    }

    fn step(&mut self, grad: &Self, lr: f64) {
        let grads = grad.values();
        let params = match self {
            Classifier::Cnn(p) => p.values_mut(),
            Classifier::Linear(p) => p.values_mut(),
        };
        for (p, g) in params.into_iter().zip(grads) {
            p.iter_mut().zip(g).for_each(|(w, d)| *w -= lr * d);
        }
    }
}

/// A trained per-facet model plus everything needed to reuse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub facet: FacetSpec,
    pub config: ModelConfig,
    pub classifier: Classifier,
    /// Mean training loss after each epoch.
    pub loss_history: Vec<f64>,
    /// Vocabulary used to clean pages at inference time, when known.
    pub vocabulary: Option<Vocabulary>,
}

/// Mean-encodes every chunk of a page.
pub fn encode_page(page: &CleanPage, table: &EmbeddingTable) -> Result<Vec<Vec<f64>>> {
    if page.chunks.is_empty() {
        return Err(ModelError::NoChunks);
    }
    page.chunks.iter().map(|c| table.encode_mean(c).map_err(ModelError::from)).collect()
}

fn validate(config: &ModelConfig) -> Result<()> {
    let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
    if config.architecture == Architecture::Cnn && (config.widths.is_empty() || config.widths.contains(&0)) {
        return bad("filter widths must be non-empty and positive");
    }
    if config.architecture == Architecture::Cnn && config.filters_per_width == 0 {
        return bad("filters_per_width must be positive");
    }
    if config.batch_size == 0 {
        return bad("batch_size must be positive");
    }
    if !config.learning_rate.is_finite() || config.learning_rate < 0.0 {
        return bad("learning_rate must be finite and non-negative");
    }
    Ok(())
}

/// Encoded chunks of one page with its target vector.
type Unit = (Vec<Vec<f64>>, Vec<f64>);

/// Pages of every site that carries labels for the facet, with the site's
/// labels broadcast to each page. Sites are visited in domain order.
fn training_units(
    sites: &[SiteDocument],
    facet: &FacetSpec,
    table: &EmbeddingTable,
) -> Result<Vec<Unit>> {
    let mut ordered: Vec<&SiteDocument> = sites.iter().collect();
    ordered.sort_by(|a, b| a.domain.cmp(&b.domain));
    let mut units = Vec::new();
    for site in ordered {
        let Some(labels) = site.labels_for(facet.facet) else { continue };
        let targets = facet.targets(labels)?;
        for page in &site.pages {
            units.push((encode_page(page, table)?, targets.clone()));
        }
    }
    Ok(units)
}

/// Mini-batch gradient descent with a fixed seed.
///
/// Only labels of `facet.facet` are read. The run is fully deterministic: the
/// seed drives both the initialization and the per-epoch shuffles.
pub fn train(
    sites: &[SiteDocument],
    facet: &FacetSpec,
    table: &EmbeddingTable,
    config: &ModelConfig,
) -> Result<TrainedModel> {
    validate(config)?;
    let units = training_units(sites, facet, table)?;
    if units.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut classifier = Classifier::initial(config, table.dim(), facet.len(), &mut rng);
    let mut order: Vec<usize> = (0..units.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grad = classifier.zeros_like();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (chunks, targets) = &units[i];
                classifier.accumulate_grad(chunks, targets, scale, &mut grad)?;
            }
            classifier.step(&grad, config.learning_rate);
        }
        let mut total = 0.0;
        for (chunks, targets) in &units {
            total += super::loss(&classifier.forward(chunks)?, targets)?;
        }
        loss_history.push(total / units.len() as f64);
    }
    Ok(TrainedModel { facet: facet.clone(), config: config.clone(), classifier, loss_history, vocabulary: None })
}

impl TrainedModel {
    pub fn predict_page(&self, page: &CleanPage, table: &EmbeddingTable) -> Result<PagePrediction> {
        let chunks = encode_page(page, table)?;
        Ok(PagePrediction { url: page.url.clone(), probs: self.classifier.forward(&chunks)? })
    }

    pub fn predict_site(&self, site: &SiteDocument, table: &EmbeddingTable) -> Result<SitePrediction> {
        let pages = site.pages.iter().map(|p| self.predict_page(p, table)).collect::<Result<Vec<_>>>()?;
        forward_site(site.domain.clone(), pages)
    }

    /// Label → probability for a site prediction.
    pub fn label_probs<'a>(&'a self, pred: &'a SitePrediction) -> impl Iterator<Item = (&'a str, f64)> {
        self.facet.labels.iter().map(String::as_str).zip(pred.probs.iter().copied())
    }
}
