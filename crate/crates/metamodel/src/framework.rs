//! The paired environment: observed elements with feature vectors, base
//! models, and dataset/model pairings kept mutually consistent.
//!
//! The central invariant is bijectivity: every pairing's dataset is exactly
//! the set of observed elements satisfying its model. Mutating operations
//! either check the invariant up front (`pair`) or re-establish it with a
//! revalidation sweep (`ingest_element` and the derived pairing operations).

use crate::error::{Error, Result};
use crate::expr::{self, op_apply, ModelExpr, SetExpr};
use crate::sets::{Dataset, ElementId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Typed value of one feature on one element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl FeatureValue {
    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureValue::Bool(_) => FeatureKind::Bool,
            FeatureValue::Int(_) => FeatureKind::Int,
            FeatureValue::Float(_) => FeatureKind::Float,
            FeatureValue::Text(_) => FeatureKind::Text,
        }
    }

    /// Numeric view; integers promote to floats.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FeatureValue::Int(v) => Some(*v as f64),
            FeatureValue::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            FeatureValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            FeatureValue::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            FeatureValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Bool,
    Int,
    Float,
    Text,
}

/// Feature vector of one observed element, keyed by feature id.
pub type FeatureVector = BTreeMap<String, FeatureValue>;

/// Declaration of a feature: its id, value kind, and optionally the name of
/// an extractor plugin that computes it during ingestion when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub id: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plugin: Option<String>,
}

impl FeatureDef {
    pub fn new(id: impl Into<String>, kind: FeatureKind) -> FeatureDef {
        FeatureDef {
            id: id.into(),
            kind,
            plugin: None,
        }
    }

    pub fn with_plugin(mut self, plugin: impl Into<String>) -> FeatureDef {
        self.plugin = Some(plugin.into());
        self
    }
}

/// Membership predicate bound by name through the plugin registry.
pub type PredicateFn = dyn Fn(&FeatureVector) -> Result<bool> + Send + Sync;

/// Feature extractor bound by name through the plugin registry.
pub type ExtractorFn = dyn Fn(&ElementId, &FeatureVector) -> Result<FeatureValue> + Send + Sync;

/// How a base model decides membership of an element.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelBody {
    /// Named predicate over the element's feature vector, resolved through
    /// the framework's plugin registry at evaluation time.
    Plugin(String),
    /// Composition of other models in the logic domain.
    Dsl(ModelExpr),
    /// Explicit member list: the indicator model of a raw dataset. This is
    /// the degenerate model attached to data that arrives without a theory.
    Indicator(BTreeSet<ElementId>),
}

/// A named model with no dependence on pairings of its own: the leaves of
/// the logic domain.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseModel {
    pub id: String,
    pub body: ModelBody,
    pub description: String,
}

impl BaseModel {
    pub fn plugin(
        id: impl Into<String>,
        plugin: impl Into<String>,
        description: impl Into<String>,
    ) -> BaseModel {
        BaseModel {
            id: id.into(),
            body: ModelBody::Plugin(plugin.into()),
            description: description.into(),
        }
    }

    pub fn from_dsl(
        id: impl Into<String>,
        dsl: &str,
        description: impl Into<String>,
    ) -> Result<BaseModel> {
        Ok(BaseModel {
            id: id.into(),
            body: ModelBody::Dsl(expr::parse_model(dsl)?),
            description: description.into(),
        })
    }

    pub fn indicator(
        id: impl Into<String>,
        members: impl IntoIterator<Item = ElementId>,
        description: impl Into<String>,
    ) -> BaseModel {
        BaseModel {
            id: id.into(),
            body: ModelBody::Indicator(members.into_iter().collect()),
            description: description.into(),
        }
    }
}

/// One dataset/model pair. The dataset id doubles as the pairing id, and the
/// bijectivity invariant ties the two halves together: the dataset holds
/// exactly the observed elements the model accepts.
#[derive(Clone, Debug)]
pub struct Pairing {
    dataset: Dataset,
    model: ModelExpr,
}

impl Pairing {
    pub fn id(&self) -> &str {
        &self.dataset.id
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn model(&self) -> &ModelExpr {
        &self.model
    }
}

/// A finite environment of observed elements together with the features,
/// base models, and pairings defined over it. The set of observed elements
/// is the universe S_E that complements and extensions are taken against.
pub struct Framework {
    universe: String,
    features: BTreeMap<String, FeatureDef>,
    feature_order: Vec<String>,
    elements: BTreeMap<ElementId, FeatureVector>,
    base_models: BTreeMap<String, BaseModel>,
    base_order: Vec<String>,
    pairings: BTreeMap<String, Pairing>,
    pairing_order: Vec<String>,
    predicates: BTreeMap<String, Arc<PredicateFn>>,
    extractors: BTreeMap<String, Arc<ExtractorFn>>,
}

impl fmt::Debug for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Framework")
            .field("universe", &self.universe)
            .field("elements", &self.elements.len())
            .field("features", &self.feature_order)
            .field("base_models", &self.base_order)
            .field("pairings", &self.pairing_order)
            .finish()
    }
}

impl Framework {
    pub fn new(universe: impl Into<String>) -> Framework {
        Framework {
            universe: universe.into(),
            features: BTreeMap::new(),
            feature_order: Vec::new(),
            elements: BTreeMap::new(),
            base_models: BTreeMap::new(),
            base_order: Vec::new(),
            pairings: BTreeMap::new(),
            pairing_order: Vec::new(),
            predicates: BTreeMap::new(),
            extractors: BTreeMap::new(),
        }
    }

    pub fn universe(&self) -> &str {
        &self.universe
    }

    // ---- registries ----

    pub fn register_feature(&mut self, def: FeatureDef) -> Result<()> {
        if self.features.contains_key(&def.id) {
            return Err(Error::DuplicateId(def.id));
        }
        self.feature_order.push(def.id.clone());
        self.features.insert(def.id.clone(), def);
        Ok(())
    }

    /// Bind a membership predicate to a plugin name. Rebinding replaces the
    /// previous function, which is how persisted frameworks restore their
    /// plugin models after loading.
    pub fn register_predicate(
        &mut self,
        name: impl Into<String>,
        f: impl Fn(&FeatureVector) -> Result<bool> + Send + Sync + 'static,
    ) {
        self.predicates.insert(name.into(), Arc::new(f));
    }

    pub fn register_extractor(
        &mut self,
        name: impl Into<String>,
        f: impl Fn(&ElementId, &FeatureVector) -> Result<FeatureValue> + Send + Sync + 'static,
    ) {
        self.extractors.insert(name.into(), Arc::new(f));
    }

    pub fn register_base_model(&mut self, model: BaseModel) -> Result<()> {
        self.check_fresh(&model.id)?;
        if let ModelBody::Dsl(m) = &model.body {
            self.check_model_closed(m)?;
        }
        self.base_order.push(model.id.clone());
        self.base_models.insert(model.id.clone(), model);
        Ok(())
    }

    fn check_fresh(&self, id: &str) -> Result<()> {
        // Base models and pairings share the expression namespace.
        if self.base_models.contains_key(id) || self.pairings.contains_key(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        Ok(())
    }

    /// Every leaf must resolve and no unknowns may remain.
    fn check_model_closed(&self, m: &ModelExpr) -> Result<()> {
        match m {
            ModelExpr::Leaf(id) => {
                if self.base_models.contains_key(id) || self.pairings.contains_key(id) {
                    Ok(())
                } else {
                    Err(Error::UnknownIdentifier(id.clone()))
                }
            }
            ModelExpr::Unknown(n) => Err(Error::UnboundUnknown(n.clone())),
            ModelExpr::Not(c) => self.check_model_closed(c),
            ModelExpr::Binary(_, l, r) => {
                self.check_model_closed(l)?;
                self.check_model_closed(r)
            }
        }
    }

    // ---- observation ----

    /// Observe one element. Provided features are validated against their
    /// declarations, declared-but-absent features with an extractor plugin
    /// are computed, and every pairing is then reswept so datasets stay the
    /// exact extensions of their models over the grown environment.
    pub fn ingest_element(
        &mut self,
        id: impl Into<ElementId>,
        features: FeatureVector,
    ) -> Result<()> {
        let id = id.into();
        self.insert_element(id, features)?;
        self.revalidate()
    }

    /// Observe a batch of elements with a single revalidation sweep at the
    /// end. Equivalent to repeated [`Framework::ingest_element`], just
    /// cheaper for bulk loads.
    pub fn ingest_elements(
        &mut self,
        batch: impl IntoIterator<Item = (ElementId, FeatureVector)>,
    ) -> Result<()> {
        for (id, features) in batch {
            self.insert_element(id, features)?;
        }
        self.revalidate()
    }

    fn insert_element(&mut self, id: ElementId, mut features: FeatureVector) -> Result<()> {
        if self.elements.contains_key(&id) {
            return Err(Error::AlreadyObserved { element: id });
        }
        for (key, value) in &features {
            let def = self
                .features
                .get(key)
                .ok_or_else(|| Error::UnknownIdentifier(key.clone()))?;
            check_kind(def, value, &id)?;
        }
        // Fill declared features that carry an extractor plugin.
        for fid in self.feature_order.clone() {
            if features.contains_key(&fid) {
                continue;
            }
            let def = self.features[&fid].clone();
            let Some(plugin) = def.plugin.as_ref() else {
                continue;
            };
            let extractor =
                self.extractors
                    .get(plugin)
                    .cloned()
                    .ok_or_else(|| Error::FeatureExtraction {
                        feature: fid.clone(),
                        element: id.clone(),
                        message: format!("extractor plugin `{plugin}` is not registered"),
                    })?;
            let value = extractor(&id, &features)?;
            check_kind(&def, &value, &id)?;
            features.insert(fid, value);
        }
        self.elements.insert(id, features);
        Ok(())
    }

    pub fn is_observed(&self, id: &ElementId) -> bool {
        self.elements.contains_key(id)
    }

    pub fn feature_vector(&self, id: &ElementId) -> Option<&FeatureVector> {
        self.elements.get(id)
    }

    pub fn elements(&self) -> impl Iterator<Item = (&ElementId, &FeatureVector)> {
        self.elements.iter()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// The observed environment as a dataset: the universe every complement
    /// and extension is taken relative to.
    pub fn s_e(&self) -> Dataset {
        Dataset::new("S_E", self.universe.clone(), self.elements.keys().cloned())
    }

    // ---- pairing construction ----

    /// Pair an explicit dataset with a model given in the DSL. Fails with
    /// [`Error::NotBijective`] unless the dataset is exactly the model's
    /// extension over the observed environment.
    pub fn pair(
        &mut self,
        id: impl Into<String>,
        members: impl IntoIterator<Item = ElementId>,
        model_dsl: &str,
    ) -> Result<&Pairing> {
        let model = expr::parse_model(model_dsl)?;
        self.pair_with_model(id, members, model)
    }

    pub fn pair_with_model(
        &mut self,
        id: impl Into<String>,
        members: impl IntoIterator<Item = ElementId>,
        model: ModelExpr,
    ) -> Result<&Pairing> {
        let id = id.into();
        self.check_fresh(&id)?;
        self.check_model_closed(&model)?;
        let dataset = Dataset::new(id.clone(), self.universe.clone(), members);
        for x in dataset.members() {
            if !self.elements.contains_key(x) {
                return Err(Error::UnknownElement(x.to_string()));
            }
        }
        let ext = self.extension_of(&model)?;
        if !dataset.same_members(&ext) {
            return Err(self.bijectivity_error(&id, &dataset, &ext));
        }
        Ok(self.insert_pairing(Pairing { dataset, model }))
    }

    /// Pair a raw dataset that arrives without a theory: the model half is
    /// a fresh indicator base model named `m_<id>`, so the pairing is
    /// bijective by construction and inert under later observations unless
    /// listed elements arrive.
    pub fn pair_data(
        &mut self,
        id: impl Into<String>,
        members: impl IntoIterator<Item = ElementId>,
    ) -> Result<&Pairing> {
        let id = id.into();
        let base_id = format!("m_{id}");
        self.check_fresh(&id)?;
        self.check_fresh(&base_id)?;
        let dataset = Dataset::new(id.clone(), self.universe.clone(), members);
        for x in dataset.members() {
            if !self.elements.contains_key(x) {
                return Err(Error::UnknownElement(x.to_string()));
            }
        }
        self.register_base_model(BaseModel::indicator(
            base_id.clone(),
            dataset.members().cloned(),
            format!("indicator model of dataset {id}"),
        ))?;
        Ok(self.insert_pairing(Pairing {
            dataset,
            model: ModelExpr::leaf(base_id),
        }))
    }

    /// Pair a model that arrives without data: the dataset half is computed
    /// as the model's extension over the observed environment.
    pub fn ingest_model(&mut self, id: impl Into<String>, model_dsl: &str) -> Result<&Pairing> {
        let id = id.into();
        self.check_fresh(&id)?;
        let model = expr::parse_model(model_dsl)?;
        self.check_model_closed(&model)?;
        let dataset = self.extension_of(&model)?.with_id(id);
        Ok(self.insert_pairing(Pairing { dataset, model }))
    }

    fn insert_pairing(&mut self, pairing: Pairing) -> &Pairing {
        let id = pairing.id().to_string();
        self.pairing_order.push(id.clone());
        self.pairings.insert(id.clone(), pairing);
        &self.pairings[&id]
    }

    /// Whether a pairing's model references other pairings or base models,
    /// or is just the indicator of its own member list.
    pub fn is_data_only(&self, id: &str) -> bool {
        match self.pairings.get(id).map(|p| &p.model) {
            Some(ModelExpr::Leaf(base)) => matches!(
                self.base_models.get(base).map(|b| &b.body),
                Some(ModelBody::Indicator(_))
            ),
            _ => false,
        }
    }

    // ---- derived pairings ----

    /// New pairing covering both inputs: dataset union paired with model
    /// disjunction. Bijective whenever the inputs are.
    pub fn merge_pairings(
        &mut self,
        new_id: impl Into<String>,
        a: &str,
        b: &str,
    ) -> Result<&Pairing> {
        let new_id = new_id.into();
        self.check_fresh(&new_id)?;
        let da = self.pairing_dataset(a)?.clone();
        let db = self.pairing_dataset(b)?.clone();
        let dataset = crate::sets::union(&da, &db)?.with_id(new_id);
        let model = ModelExpr::or(ModelExpr::leaf(a), ModelExpr::leaf(b));
        Ok(self.insert_pairing(Pairing { dataset, model }))
    }

    /// New pairing narrowing `id` to the given member list: dataset
    /// intersection paired with a conjunction against a fresh indicator.
    pub fn restrict_pairing(
        &mut self,
        new_id: impl Into<String>,
        id: &str,
        keep: impl IntoIterator<Item = ElementId>,
    ) -> Result<&Pairing> {
        let new_id = new_id.into();
        let base_id = format!("m_{new_id}");
        self.check_fresh(&new_id)?;
        self.check_fresh(&base_id)?;
        let keep: BTreeSet<ElementId> = keep.into_iter().collect();
        let source = self.pairing_dataset(id)?.clone();
        let members: Vec<ElementId> = source
            .members()
            .filter(|x| keep.contains(x))
            .cloned()
            .collect();
        self.register_base_model(BaseModel::indicator(
            base_id.clone(),
            keep,
            format!("restriction mask applied to {id}"),
        ))?;
        let dataset = Dataset::new(new_id, self.universe.clone(), members);
        let model = ModelExpr::and(ModelExpr::leaf(id), ModelExpr::leaf(base_id));
        Ok(self.insert_pairing(Pairing { dataset, model }))
    }

    /// Conjoin two models that explain the same dataset into one pairing.
    /// The inputs must have identical member sets.
    pub fn merge_models_on_shared_dataset(
        &mut self,
        new_id: impl Into<String>,
        a: &str,
        b: &str,
    ) -> Result<&Pairing> {
        let new_id = new_id.into();
        self.check_fresh(&new_id)?;
        let da = self.pairing_dataset(a)?;
        let db = self.pairing_dataset(b)?;
        if !da.same_members(db) {
            return Err(Error::domain(format!(
                "pairings `{a}` and `{b}` do not share a dataset"
            )));
        }
        let dataset = da.clone().with_id(new_id);
        let model = ModelExpr::and(ModelExpr::leaf(a), ModelExpr::leaf(b));
        Ok(self.insert_pairing(Pairing { dataset, model }))
    }

    /// Split a pairing along a divergent model: one new pairing keeps the
    /// elements the divergent model accepts (conjunction), the other keeps
    /// the rest (difference). Together they partition the source dataset.
    pub fn split_dataset_on_divergence(
        &mut self,
        id: &str,
        divergent_dsl: &str,
        id_in: impl Into<String>,
        id_out: impl Into<String>,
    ) -> Result<(Pairing, Pairing)> {
        let id_in = id_in.into();
        let id_out = id_out.into();
        self.check_fresh(&id_in)?;
        self.check_fresh(&id_out)?;
        let divergent = expr::parse_model(divergent_dsl)?;
        self.check_model_closed(&divergent)?;
        self.pairing_dataset(id)?;
        let model_in = ModelExpr::and(ModelExpr::leaf(id), divergent.clone());
        let model_out = ModelExpr::diff(ModelExpr::leaf(id), divergent);
        let ds_in = self.extension_of(&model_in)?.with_id(id_in);
        let ds_out = self.extension_of(&model_out)?.with_id(id_out);
        let p_in = self
            .insert_pairing(Pairing {
                dataset: ds_in,
                model: model_in,
            })
            .clone();
        let p_out = self
            .insert_pairing(Pairing {
                dataset: ds_out,
                model: model_out,
            })
            .clone();
        Ok((p_in, p_out))
    }

    // ---- lookup ----

    pub fn pairing(&self, id: &str) -> Result<&Pairing> {
        self.pairings
            .get(id)
            .ok_or_else(|| Error::UnknownIdentifier(id.to_string()))
    }

    fn pairing_dataset(&self, id: &str) -> Result<&Dataset> {
        Ok(self.pairing(id)?.dataset())
    }

    /// Pairing ids in creation order.
    pub fn pairing_ids(&self) -> impl Iterator<Item = &str> {
        self.pairing_order.iter().map(|s| s.as_str())
    }

    pub fn pairings(&self) -> impl Iterator<Item = &Pairing> {
        self.pairing_order.iter().map(|id| &self.pairings[id])
    }

    pub fn base_model(&self, id: &str) -> Result<&BaseModel> {
        self.base_models
            .get(id)
            .ok_or_else(|| Error::UnknownIdentifier(id.to_string()))
    }

    pub fn base_models(&self) -> impl Iterator<Item = &BaseModel> {
        self.base_order.iter().map(|id| &self.base_models[id])
    }

    pub fn features(&self) -> impl Iterator<Item = &FeatureDef> {
        self.feature_order.iter().map(|id| &self.features[id])
    }

    // ---- evaluation ----

    /// Resolve a set-expression leaf: a pairing id yields its dataset, a
    /// base-model id yields the model's extension over the environment.
    pub fn leaf_dataset(&self, id: &str) -> Result<Dataset> {
        if let Some(p) = self.pairings.get(id) {
            return Ok(p.dataset.clone());
        }
        if self.base_models.contains_key(id) {
            return self.extension_of(&ModelExpr::leaf(id));
        }
        Err(Error::UnknownIdentifier(id.to_string()))
    }

    /// Whether observed element `x` satisfies the model expression.
    pub fn satisfies_expr(&self, e: &ModelExpr, x: &ElementId) -> Result<bool> {
        if !self.elements.contains_key(x) {
            return Err(Error::UnknownElement(x.to_string()));
        }
        let mut guard = BTreeSet::new();
        self.sat(e, x, &mut guard)
    }

    fn sat(&self, e: &ModelExpr, x: &ElementId, guard: &mut BTreeSet<String>) -> Result<bool> {
        match e {
            ModelExpr::Leaf(id) => self.sat_leaf(id, x, guard),
            ModelExpr::Unknown(n) => Err(Error::UnboundUnknown(n.clone())),
            ModelExpr::Not(c) => Ok(!self.sat(c, x, guard)?),
            ModelExpr::Binary(op, l, r) => {
                let a = self.sat(l, x, guard)?;
                let b = self.sat(r, x, guard)?;
                Ok(op_apply(*op, a, b))
            }
        }
    }

    fn sat_leaf(&self, id: &str, x: &ElementId, guard: &mut BTreeSet<String>) -> Result<bool> {
        if !guard.insert(id.to_string()) {
            return Err(Error::CyclicModel(id.to_string()));
        }
        let out = if let Some(base) = self.base_models.get(id) {
            match &base.body {
                ModelBody::Plugin(name) => {
                    let pred = self.predicates.get(name).ok_or_else(|| {
                        Error::domain(format!(
                            "model `{id}`: predicate plugin `{name}` is not registered"
                        ))
                    })?;
                    let fv = self.elements.get(x).expect("satisfies checked observation");
                    pred(fv)
                }
                ModelBody::Dsl(m) => self.sat(m, x, guard),
                ModelBody::Indicator(members) => Ok(members.contains(x)),
            }
        } else if let Some(p) = self.pairings.get(id) {
            self.sat(&p.model, x, guard)
        } else {
            Err(Error::UnknownIdentifier(id.to_string()))
        };
        guard.remove(id);
        out
    }

    /// The observed elements satisfying the model expression.
    pub fn extension_of(&self, e: &ModelExpr) -> Result<Dataset> {
        let mut members = BTreeSet::new();
        for x in self.elements.keys() {
            let mut guard = BTreeSet::new();
            if self.sat(e, x, &mut guard)? {
                members.insert(x.clone());
            }
        }
        Ok(Dataset::new("", self.universe.clone(), members))
    }

    // ---- consistency ----

    /// Recompute every pairing's dataset as its model's extension until the
    /// system is stable. Indicator-backed pairings never drift; derived ones
    /// settle in as many sweeps as their reference depth.
    fn revalidate(&mut self) -> Result<()> {
        for _ in 0..=self.pairing_order.len() + 1 {
            let mut changed = false;
            for id in self.pairing_order.clone() {
                let model = self.pairings[&id].model.clone();
                let ext = self.extension_of(&model)?;
                let p = self.pairings.get_mut(&id).expect("order tracks map");
                if !p.dataset.same_members(&ext) {
                    p.dataset = ext.with_id(id);
                    changed = true;
                }
            }
            if !changed {
                return Ok(());
            }
        }
        Err(Error::domain("pairing revalidation did not stabilize"))
    }

    fn bijectivity_error(&self, id: &str, dataset: &Dataset, ext: &Dataset) -> Error {
        let missing = ext
            .members()
            .filter(|x| !dataset.contains(x))
            .cloned()
            .collect();
        let stray = dataset
            .members()
            .filter(|x| !ext.contains(x))
            .cloned()
            .collect();
        Error::NotBijective {
            id: id.to_string(),
            missing,
            stray,
        }
    }

    /// Check one pairing's invariant, with the offending elements on error.
    pub fn check_bijective(&self, id: &str) -> Result<()> {
        let p = self.pairing(id)?;
        let ext = self.extension_of(&p.model)?;
        if p.dataset.same_members(&ext) {
            Ok(())
        } else {
            Err(self.bijectivity_error(id, &p.dataset, &ext))
        }
    }

    pub fn is_bijective(&self, id: &str) -> Result<bool> {
        match self.check_bijective(id) {
            Ok(()) => Ok(true),
            Err(Error::NotBijective { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Check every pairing, failing on the first broken one.
    pub fn validate_all(&self) -> Result<()> {
        for id in &self.pairing_order {
            self.check_bijective(id)?;
        }
        Ok(())
    }

    // ---- display ----

    /// Logic-domain label of a leaf: a pairing whose model is a single base
    /// model shows that model's id, anything else keeps its own id.
    pub fn model_label(&self, id: &str) -> String {
        if let Some(p) = self.pairings.get(id) {
            if let ModelExpr::Leaf(base) = &p.model {
                return base.clone();
            }
        }
        id.to_string()
    }

    /// Render the logic-domain dual of a set expression, with leaves
    /// relabeled through [`Framework::model_label`].
    pub fn render_dual(&self, e: &SetExpr) -> String {
        fn relabel(fw: &Framework, m: &ModelExpr) -> ModelExpr {
            match m {
                ModelExpr::Leaf(id) => ModelExpr::Leaf(fw.model_label(id)),
                ModelExpr::Unknown(n) => ModelExpr::Unknown(n.clone()),
                ModelExpr::Not(c) => ModelExpr::neg(relabel(fw, c)),
                ModelExpr::Binary(op, l, r) => {
                    ModelExpr::binary(*op, relabel(fw, l), relabel(fw, r))
                }
            }
        }
        relabel(self, &expr::dualize(e)).to_string()
    }

    pub fn summary(&self) -> String {
        format!(
            "universe `{}`: {} elements, {} features, {} base models, {} pairings",
            self.universe,
            self.elements.len(),
            self.feature_order.len(),
            self.base_order.len(),
            self.pairing_order.len()
        )
    }

    // ---- persistence ----

    pub fn to_json(&self) -> Result<String> {
        let file = FileFramework {
            universe: self.universe.clone(),
            features: self.features().cloned().collect(),
            elements: self
                .elements
                .iter()
                .map(|(id, features)| FileElement {
                    id: id.clone(),
                    features: features.clone(),
                })
                .collect(),
            base_models: self
                .base_models()
                .map(|b| {
                    let mut fb = FileBaseModel {
                        id: b.id.clone(),
                        description: b.description.clone(),
                        plugin: None,
                        predicate_dsl: None,
                        indicator: None,
                    };
                    match &b.body {
                        ModelBody::Plugin(p) => fb.plugin = Some(p.clone()),
                        ModelBody::Dsl(m) => fb.predicate_dsl = Some(m.to_string()),
                        ModelBody::Indicator(s) => {
                            fb.indicator = Some(s.iter().cloned().collect())
                        }
                    }
                    fb
                })
                .collect(),
            pairings: self
                .pairings()
                .map(|p| FilePairing {
                    id: p.id().to_string(),
                    dataset: p.dataset().to_vec(),
                    model: p.model().to_string(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    /// Load a framework from its JSON form. Plugin predicates and extractors
    /// are name references in the file; rebind them with
    /// [`Framework::register_predicate`] / [`Framework::register_extractor`]
    /// before evaluating plugin-backed models.
    pub fn from_json(text: &str) -> Result<Framework> {
        let file: FileFramework = serde_json::from_str(text)?;
        let mut fw = Framework::new(file.universe);
        for def in file.features {
            fw.register_feature(def)?;
        }
        for el in file.elements {
            if fw.elements.contains_key(&el.id) {
                return Err(Error::AlreadyObserved { element: el.id });
            }
            fw.elements.insert(el.id, el.features);
        }
        for fb in file.base_models {
            let body = match (fb.plugin, fb.predicate_dsl, fb.indicator) {
                (Some(p), None, None) => ModelBody::Plugin(p),
                (None, Some(dsl), None) => ModelBody::Dsl(expr::parse_model(&dsl)?),
                (None, None, Some(members)) => {
                    ModelBody::Indicator(members.into_iter().collect())
                }
                _ => {
                    return Err(Error::domain(format!(
                        "base model `{}` must declare exactly one of plugin, predicate_dsl, indicator",
                        fb.id
                    )))
                }
            };
            fw.check_fresh(&fb.id)?;
            fw.base_order.push(fb.id.clone());
            fw.base_models.insert(
                fb.id.clone(),
                BaseModel {
                    id: fb.id,
                    body,
                    description: fb.description,
                },
            );
        }
        for fp in file.pairings {
            fw.check_fresh(&fp.id)?;
            let model = expr::parse_model(&fp.model)?;
            let dataset = Dataset::new(fp.id.clone(), fw.universe.clone(), fp.dataset);
            fw.insert_pairing(Pairing { dataset, model });
        }
        // Identifier resolution is checked now that everything is present;
        // bijectivity is deferred to validate_all so plugins can be rebound
        // first.
        for b in fw.base_models.values() {
            if let ModelBody::Dsl(m) = &b.body {
                fw.check_model_closed(m)?;
            }
        }
        for p in fw.pairings.values() {
            fw.check_model_closed(&p.model)?;
        }
        Ok(fw)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Framework> {
        Framework::from_json(&std::fs::read_to_string(path)?)
    }
}

fn check_kind(def: &FeatureDef, value: &FeatureValue, element: &ElementId) -> Result<()> {
    let ok = def.kind == value.kind()
        || (def.kind == FeatureKind::Float && value.kind() == FeatureKind::Int);
    if ok {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "feature `{}` on element `{element}` has kind {:?}, declared {:?}",
            def.id,
            value.kind(),
            def.kind
        )))
    }
}

#[derive(Serialize, Deserialize)]
struct FileFramework {
    universe: String,
    #[serde(default)]
    features: Vec<FeatureDef>,
    #[serde(default)]
    elements: Vec<FileElement>,
    #[serde(default)]
    base_models: Vec<FileBaseModel>,
    #[serde(default)]
    pairings: Vec<FilePairing>,
}

#[derive(Serialize, Deserialize)]
struct FileElement {
    id: ElementId,
    #[serde(default)]
    features: FeatureVector,
}

#[derive(Serialize, Deserialize)]
struct FileBaseModel {
    id: String,
    #[serde(default)]
    description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plugin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predicate_dsl: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    indicator: Option<Vec<ElementId>>,
}

#[derive(Serialize, Deserialize)]
struct FilePairing {
    id: String,
    dataset: Vec<ElementId>,
    model: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{dualize, eval_set, extension, parse_set};

    fn toy() -> Framework {
        let mut fw = Framework::new("toy");
        fw.register_feature(FeatureDef::new("value", FeatureKind::Int))
            .unwrap();
        fw.register_predicate("even", |fv: &FeatureVector| {
            let v = fv
                .get("value")
                .and_then(FeatureValue::as_i64)
                .ok_or_else(|| Error::MissingFeature {
                    model: "m_even".into(),
                    feature: "value".into(),
                })?;
            Ok(v % 2 == 0)
        });
        fw.register_predicate("big", |fv: &FeatureVector| {
            Ok(fv.get("value").and_then(FeatureValue::as_i64).unwrap_or(0) > 3)
        });
        let batch: Vec<(ElementId, FeatureVector)> = (1..=6)
            .map(|v| {
                let mut fv = FeatureVector::new();
                fv.insert("value".into(), FeatureValue::Int(v));
                (ElementId::Int(v), fv)
            })
            .collect();
        fw.ingest_elements(batch).unwrap();
        fw.register_base_model(BaseModel::plugin("m_even", "even", "value is even"))
            .unwrap();
        fw.register_base_model(BaseModel::plugin("m_big", "big", "value exceeds 3"))
            .unwrap();
        fw
    }

    fn ids(v: &[i64]) -> Vec<ElementId> {
        v.iter().map(|&x| ElementId::Int(x)).collect()
    }

    #[test]
    fn pair_accepts_exact_extension_only() {
        let mut fw = toy();
        fw.pair("evens", ids(&[2, 4, 6]), "m_even").unwrap();
        assert!(fw.is_bijective("evens").unwrap());

        match fw.pair("bad", ids(&[2, 4]), "m_big") {
            Err(Error::NotBijective { id, missing, stray }) => {
                assert_eq!(id, "bad");
                assert_eq!(missing, ids(&[5, 6]));
                assert_eq!(stray, ids(&[2]));
            }
            other => panic!("expected NotBijective, got {other:?}"),
        }
    }

    #[test]
    fn ingest_element_grows_matching_datasets() {
        let mut fw = toy();
        fw.pair("evens", ids(&[2, 4, 6]), "m_even").unwrap();
        fw.pair_data("raw", ids(&[1, 3])).unwrap();

        let mut fv = FeatureVector::new();
        fv.insert("value".into(), FeatureValue::Int(8));
        fw.ingest_element(8, fv).unwrap();

        assert_eq!(fw.pairing("evens").unwrap().dataset().to_vec(), ids(&[2, 4, 6, 8]));
        // Indicator-backed data stays put.
        assert_eq!(fw.pairing("raw").unwrap().dataset().to_vec(), ids(&[1, 3]));
        fw.validate_all().unwrap();
    }

    #[test]
    fn reobservation_is_rejected() {
        let mut fw = toy();
        match fw.ingest_element(3, FeatureVector::new()) {
            Err(Error::AlreadyObserved { element }) => assert_eq!(element, ElementId::Int(3)),
            other => panic!("expected AlreadyObserved, got {other:?}"),
        }
    }

    #[test]
    fn ingest_model_computes_the_dataset() {
        let mut fw = toy();
        fw.pair("evens", ids(&[2, 4, 6]), "m_even").unwrap();
        let p = fw.ingest_model("big_evens", "m_even & m_big").unwrap();
        assert_eq!(p.dataset().to_vec(), ids(&[4, 6]));
        fw.validate_all().unwrap();
    }

    #[test]
    fn merge_restrict_and_shared_dataset_ops() {
        let mut fw = toy();
        fw.pair("evens", ids(&[2, 4, 6]), "m_even").unwrap();
        fw.pair("bigs", ids(&[4, 5, 6]), "m_big").unwrap();

        let merged = fw.merge_pairings("either", "evens", "bigs").unwrap();
        assert_eq!(merged.dataset().to_vec(), ids(&[2, 4, 5, 6]));

        let narrowed = fw
            .restrict_pairing("small_evens", "evens", ids(&[1, 2, 4]))
            .unwrap();
        assert_eq!(narrowed.dataset().to_vec(), ids(&[2, 4]));

        fw.ingest_model("evens_again", "m_even").unwrap();
        let both = fw
            .merge_models_on_shared_dataset("evens_twice", "evens", "evens_again")
            .unwrap();
        assert_eq!(both.dataset().to_vec(), ids(&[2, 4, 6]));
        fw.validate_all().unwrap();

        match fw.merge_models_on_shared_dataset("nope", "evens", "bigs") {
            Err(Error::Domain(_)) => {}
            other => panic!("expected Domain error, got {other:?}"),
        }
    }

    #[test]
    fn split_partitions_the_source_dataset() {
        let mut fw = toy();
        fw.pair("evens", ids(&[2, 4, 6]), "m_even").unwrap();
        let (inside, outside) = fw
            .split_dataset_on_divergence("evens", "m_big", "evens_big", "evens_small")
            .unwrap();
        assert_eq!(inside.dataset().to_vec(), ids(&[4, 6]));
        assert_eq!(outside.dataset().to_vec(), ids(&[2]));
        fw.validate_all().unwrap();
    }

    #[test]
    fn bridge_between_domains_on_samples() {
        let mut fw = toy();
        fw.pair("evens", ids(&[2, 4, 6]), "m_even").unwrap();
        fw.pair("bigs", ids(&[4, 5, 6]), "m_big").unwrap();
        for text in [
            "evens & bigs",
            "evens | bigs",
            "evens ^ bigs",
            "evens - bigs",
            "~evens",
            "~(evens | bigs) ^ evens",
        ] {
            let e = parse_set(text).unwrap();
            let direct = eval_set(&e, &fw).unwrap();
            let via_dual = extension(&dualize(&e), &fw).unwrap();
            assert!(direct.same_members(&via_dual), "bridge broke on {text}");
        }
    }

    #[test]
    fn dual_rendering_uses_model_labels() {
        let mut fw = toy();
        fw.pair("evens", ids(&[2, 4, 6]), "m_even").unwrap();
        fw.pair("bigs", ids(&[4, 5, 6]), "m_big").unwrap();
        let e = parse_set("~(evens & bigs)").unwrap();
        assert_eq!(fw.render_dual(&e), "~(m_even & m_big)");
    }

    #[test]
    fn json_round_trip_preserves_everything() {
        let mut fw = toy();
        fw.pair("evens", ids(&[2, 4, 6]), "m_even").unwrap();
        fw.pair_data("raw", ids(&[1, 3])).unwrap();
        fw.ingest_model("derived", "evens | raw").unwrap();

        let text = fw.to_json().unwrap();
        let mut back = Framework::from_json(&text).unwrap();
        assert_eq!(back.universe(), "toy");
        assert_eq!(back.n_elements(), 6);
        assert_eq!(
            back.pairing_ids().collect::<Vec<_>>(),
            vec!["evens", "raw", "derived"]
        );
        assert_eq!(back.pairing("derived").unwrap().dataset().to_vec(), ids(&[1, 2, 3, 4, 6]));

        // Plugins come back as names; rebind before validating.
        back.register_predicate("even", |fv: &FeatureVector| {
            Ok(fv.get("value").and_then(FeatureValue::as_i64).unwrap_or(1) % 2 == 0)
        });
        back.validate_all().unwrap();
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn cyclic_models_are_detected_at_evaluation() {
        let text = r#"{
            "universe": "loop",
            "features": [],
            "elements": [{"id": 1, "features": {}}],
            "base_models": [
                {"id": "a", "description": "", "predicate_dsl": "b"},
                {"id": "b", "description": "", "predicate_dsl": "a"}
            ],
            "pairings": []
        }"#;
        let fw = Framework::from_json(text).unwrap();
        match fw.satisfies_expr(&ModelExpr::leaf("a"), &ElementId::Int(1)) {
            Err(Error::CyclicModel(id)) => assert!(id == "a" || id == "b"),
            other => panic!("expected CyclicModel, got {other:?}"),
        }
    }

    #[test]
    fn unknown_identifiers_and_elements_error_cleanly() {
        let fw = toy();
        assert!(matches!(
            fw.leaf_dataset("nope"),
            Err(Error::UnknownIdentifier(_))
        ));
        assert!(matches!(
            fw.satisfies_expr(&ModelExpr::leaf("m_even"), &ElementId::Int(99)),
            Err(Error::UnknownElement(_))
        ));
        let mut fw = toy();
        assert!(matches!(
            fw.pair("p", ids(&[99]), "m_even"),
            Err(Error::UnknownElement(_))
        ));
    }

    #[test]
    fn extractor_plugins_fill_missing_features() {
        let mut fw = Framework::new("ex");
        fw.register_feature(FeatureDef::new("raw", FeatureKind::Int))
            .unwrap();
        fw.register_feature(FeatureDef::new("doubled", FeatureKind::Int).with_plugin("dbl"))
            .unwrap();
        fw.register_extractor("dbl", |_, fv: &FeatureVector| {
            let v = fv.get("raw").and_then(FeatureValue::as_i64).unwrap_or(0);
            Ok(FeatureValue::Int(2 * v))
        });
        let mut fv = FeatureVector::new();
        fv.insert("raw".into(), FeatureValue::Int(21));
        fw.ingest_element(7, fv).unwrap();
        assert_eq!(
            fw.feature_vector(&ElementId::Int(7))
                .unwrap()
                .get("doubled"),
            Some(&FeatureValue::Int(42))
        );

        let mut fw2 = Framework::new("ex2");
        fw2.register_feature(FeatureDef::new("f", FeatureKind::Int).with_plugin("gone"))
            .unwrap();
        match fw2.ingest_element(1, FeatureVector::new()) {
            Err(Error::FeatureExtraction { feature, .. }) => assert_eq!(feature, "f"),
            other => panic!("expected FeatureExtraction, got {other:?}"),
        }
    }

    #[test]
    fn feature_kind_mismatch_is_rejected() {
        let mut fw = Framework::new("k");
        fw.register_feature(FeatureDef::new("x", FeatureKind::Float))
            .unwrap();
        let mut fv = FeatureVector::new();
        fv.insert("x".into(), FeatureValue::Text("oops".into()));
        assert!(fw.ingest_element(1, fv).is_err());
        // Int promotes to float.
        let mut fv = FeatureVector::new();
        fv.insert("x".into(), FeatureValue::Int(3));
        fw.ingest_element(2, fv).unwrap();
    }
}
