//! Network and query data model.
//!
//! Diseases and symptoms are re-indexed densely in insertion order; the
//! integer keys from the input are kept as metadata together with names.
//! Edges are stored per symptom (column-sparse) with `θ = -ln(1 - p)`
//! precomputed, since every inference path walks symptom parent lists.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Entity, Error, Result, ValidationError};
use crate::math;

/// Dense disease index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiseaseId(pub u32);

/// Dense symptom index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymptomId(pub u32);

impl DiseaseId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl SymptomId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Disease {
    pub key: i64,
    pub name: String,
    /// `P(d+)`, strictly inside (0, 1).
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symptom {
    pub key: i64,
    pub name: String,
    /// `P(f+ | all parents absent)`, in [0, 1).
    pub leak: f64,
}

/// One incoming edge of a symptom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parent {
    pub disease: DiseaseId,
    /// `P(f+ | d+)`, in (0, 1).
    pub p: f64,
    /// `-ln P(f- | d+)`.
    pub theta: f64,
}

impl Parent {
    /// `P(f- | d+)`.
    #[inline]
    pub fn q(&self) -> f64 {
        1.0 - self.p
    }
}

/// Immutable bipartite noisy-or network.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyOrNetwork {
    diseases: Vec<Disease>,
    symptoms: Vec<Symptom>,
    parents: Vec<Vec<Parent>>,
    children: Vec<Vec<SymptomId>>,
    leak_theta: Vec<f64>,
    disease_keys: BTreeMap<i64, u32>,
    symptom_keys: BTreeMap<i64, u32>,
}

impl NoisyOrNetwork {
    pub fn n_diseases(&self) -> usize {
        self.diseases.len()
    }

    pub fn n_symptoms(&self) -> usize {
        self.symptoms.len()
    }

    pub fn n_edges(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn diseases(&self) -> &[Disease] {
        &self.diseases
    }

    pub fn symptoms(&self) -> &[Symptom] {
        &self.symptoms
    }

    pub fn disease(&self, d: DiseaseId) -> &Disease {
        &self.diseases[d.index()]
    }

    pub fn symptom(&self, s: SymptomId) -> &Symptom {
        &self.symptoms[s.index()]
    }

    #[inline]
    pub fn prior(&self, d: DiseaseId) -> f64 {
        self.diseases[d.index()].prior
    }

    #[inline]
    pub fn leak(&self, s: SymptomId) -> f64 {
        self.symptoms[s.index()].leak
    }

    /// `-ln(1 - leak)` for the virtual always-present parent; 0 without leak.
    #[inline]
    pub fn leak_theta(&self, s: SymptomId) -> f64 {
        self.leak_theta[s.index()]
    }

    /// Parents of `s` in ascending disease order.
    #[inline]
    pub fn parents(&self, s: SymptomId) -> &[Parent] {
        &self.parents[s.index()]
    }

    /// Children of `d` in ascending symptom order.
    #[inline]
    pub fn children(&self, d: DiseaseId) -> &[SymptomId] {
        &self.children[d.index()]
    }

    pub fn disease_ids(&self) -> impl Iterator<Item = DiseaseId> + '_ {
        (0..self.diseases.len() as u32).map(DiseaseId)
    }

    pub fn symptom_ids(&self) -> impl Iterator<Item = SymptomId> + '_ {
        (0..self.symptoms.len() as u32).map(SymptomId)
    }

    pub fn disease_by_key(&self, key: i64) -> Result<DiseaseId> {
        self.disease_keys
            .get(&key)
            .map(|&i| DiseaseId(i))
            .ok_or(Error::UnknownDisease(key))
    }

    pub fn symptom_by_key(&self, key: i64) -> Result<SymptomId> {
        self.symptom_keys
            .get(&key)
            .map(|&i| SymptomId(i))
            .ok_or(Error::UnknownSymptom(key))
    }

    /// `θ_ji = -ln P(f_j- | d_i+)`, or 0 when there is no edge.
    pub fn theta(&self, s: SymptomId, d: DiseaseId) -> f64 {
        self.edge(s, d).map_or(0.0, |e| e.theta)
    }

    pub fn edge(&self, s: SymptomId, d: DiseaseId) -> Option<&Parent> {
        let ps = &self.parents[s.index()];
        ps.binary_search_by_key(&d, |p| p.disease)
            .ok()
            .map(|k| &ps[k])
    }

    /// `π(f_j)`: diseases with nonzero probability of causing `s`, ascending.
    pub fn parent_set(&self, s: SymptomId) -> Result<Vec<DiseaseId>> {
        let ps = self
            .parents
            .get(s.index())
            .ok_or(Error::UnknownSymptom(s.0 as i64))?;
        Ok(ps.iter().map(|p| p.disease).collect())
    }

    /// Inverse prior odds `P(d-)/P(d+)`.
    pub fn inverse_prior_odds(&self, d: DiseaseId) -> Result<f64> {
        let dis = self
            .diseases
            .get(d.index())
            .ok_or(Error::UnknownDisease(d.0 as i64))?;
        Ok((1.0 - dis.prior) / dis.prior)
    }

    /// Same graph with every prior replaced. Priors must stay in (0, 1).
    pub fn with_priors(&self, priors: &[f64]) -> Result<NoisyOrNetwork> {
        if priors.len() != self.diseases.len() {
            return Err(Error::LengthMismatch {
                left: priors.len(),
                right: self.diseases.len(),
            });
        }
        let mut out = self.clone();
        for (d, &p) in out.diseases.iter_mut().zip(priors) {
            check_prior(d.key, p)?;
            d.prior = p;
        }
        Ok(out)
    }

    pub fn priors(&self) -> Vec<f64> {
        self.diseases.iter().map(|d| d.prior).collect()
    }

    /// A symptom that can never be positive: no parents and no leak.
    pub fn is_unexplainable(&self, s: SymptomId) -> bool {
        self.parents[s.index()].is_empty() && self.leak_theta[s.index()] == 0.0
    }
}

fn check_prior(key: i64, prior: f64) -> Result<(), ValidationError> {
    if prior > 0.0 && prior < 1.0 {
        Ok(())
    } else {
        Err(ValidationError {
            entity: Entity::Disease(key),
            reason: "prior must lie in (0, 1)",
        })
    }
}

/// Incremental, validating constructor for [`NoisyOrNetwork`].
#[derive(Debug, Default, Clone)]
pub struct NetworkBuilder {
    diseases: Vec<Disease>,
    symptoms: Vec<Symptom>,
    edges: Vec<(u32, u32, f64)>,
    disease_keys: BTreeMap<i64, u32>,
    symptom_keys: BTreeMap<i64, u32>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(diseases: usize, symptoms: usize, edges: usize) -> Self {
        NetworkBuilder {
            diseases: Vec::with_capacity(diseases),
            symptoms: Vec::with_capacity(symptoms),
            edges: Vec::with_capacity(edges),
            ..Self::default()
        }
    }

    pub fn add_disease(
        &mut self,
        key: i64,
        name: impl Into<String>,
        prior: f64,
    ) -> Result<DiseaseId> {
        check_prior(key, prior)?;
        let idx = self.diseases.len() as u32;
        if self.disease_keys.insert(key, idx).is_some() {
            return Err(ValidationError {
                entity: Entity::Disease(key),
                reason: "duplicate disease id",
            }
            .into());
        }
        self.diseases.push(Disease {
            key,
            name: name.into(),
            prior,
        });
        Ok(DiseaseId(idx))
    }

    pub fn add_symptom(
        &mut self,
        key: i64,
        name: impl Into<String>,
        leak: f64,
    ) -> Result<SymptomId> {
        if !(0.0..1.0).contains(&leak) {
            return Err(ValidationError {
                entity: Entity::Symptom(key),
                reason: "leak must lie in [0, 1)",
            }
            .into());
        }
        let idx = self.symptoms.len() as u32;
        if self.symptom_keys.insert(key, idx).is_some() {
            return Err(ValidationError {
                entity: Entity::Symptom(key),
                reason: "duplicate symptom id",
            }
            .into());
        }
        self.symptoms.push(Symptom {
            key,
            name: name.into(),
            leak,
        });
        Ok(SymptomId(idx))
    }

    /// Adds `P(f+ | d+) = p` for the symptom and disease with the given keys.
    pub fn add_edge(&mut self, symptom_key: i64, disease_key: i64, p: f64) -> Result<()> {
        let entity = Entity::Edge {
            symptom: symptom_key,
            disease: disease_key,
        };
        let s = *self.symptom_keys.get(&symptom_key).ok_or(ValidationError {
            entity,
            reason: "edge references an unknown symptom",
        })?;
        let d = *self.disease_keys.get(&disease_key).ok_or(ValidationError {
            entity,
            reason: "edge references an unknown disease",
        })?;
        self.push_edge(SymptomId(s), DiseaseId(d), p)
    }

    /// Same as [`add_edge`](Self::add_edge) with dense indices.
    pub fn push_edge(&mut self, s: SymptomId, d: DiseaseId, p: f64) -> Result<()> {
        if !(p > 0.0 && p < 1.0) {
            let entity = Entity::Edge {
                symptom: self.symptoms.get(s.index()).map_or(s.0 as i64, |x| x.key),
                disease: self.diseases.get(d.index()).map_or(d.0 as i64, |x| x.key),
            };
            // p = 1 would make θ infinite.
            return Err(ValidationError {
                entity,
                reason: "P(f+|d+) must lie in (0, 1)",
            }
            .into());
        }
        self.edges.push((s.0, d.0, p));
        Ok(())
    }

    pub fn build(self) -> Result<NoisyOrNetwork> {
        let n_d = self.diseases.len();
        let n_s = self.symptoms.len();
        let mut parents: Vec<Vec<Parent>> = alloc::vec![Vec::new(); n_s];
        for &(s, d, p) in &self.edges {
            if s as usize >= n_s || d as usize >= n_d {
                return Err(ValidationError {
                    entity: Entity::Edge {
                        symptom: s as i64,
                        disease: d as i64,
                    },
                    reason: "edge references an unknown node",
                }
                .into());
            }
            parents[s as usize].push(Parent {
                disease: DiseaseId(d),
                p,
                theta: -math::ln_1p(-p),
            });
        }
        let mut children: Vec<Vec<SymptomId>> = alloc::vec![Vec::new(); n_d];
        for (s, ps) in parents.iter_mut().enumerate() {
            ps.sort_by_key(|p| p.disease);
            for w in ps.windows(2) {
                if w[0].disease == w[1].disease {
                    return Err(ValidationError {
                        entity: Entity::Edge {
                            symptom: self.symptoms[s].key,
                            disease: self.diseases[w[0].disease.index()].key,
                        },
                        reason: "duplicate edge",
                    }
                    .into());
                }
            }
            for p in ps.iter() {
                children[p.disease.index()].push(SymptomId(s as u32));
            }
        }
        let leak_theta = self
            .symptoms
            .iter()
            .map(|s| -math::ln_1p(-s.leak))
            .collect();
        Ok(NoisyOrNetwork {
            diseases: self.diseases,
            symptoms: self.symptoms,
            parents,
            children,
            leak_theta,
            disease_keys: self.disease_keys,
            symptom_keys: self.symptom_keys,
        })
    }
}

/// Observed findings: positive `F+`, negative `F-` and an optional label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Query {
    pub positive: Vec<SymptomId>,
    pub negative: Vec<SymptomId>,
    pub label: Option<DiseaseId>,
}

impl Query {
    /// Builds a query with sorted, deduplicated finding lists.
    pub fn new(
        positive: impl IntoIterator<Item = SymptomId>,
        negative: impl IntoIterator<Item = SymptomId>,
        label: Option<DiseaseId>,
    ) -> Self {
        let mut positive: Vec<_> = positive.into_iter().collect();
        let mut negative: Vec<_> = negative.into_iter().collect();
        positive.sort_unstable();
        positive.dedup();
        negative.sort_unstable();
        negative.dedup();
        Query {
            positive,
            negative,
            label,
        }
    }

    pub fn positive_only(positive: impl IntoIterator<Item = SymptomId>) -> Self {
        Query::new(positive, [], None)
    }

    /// Checks ids against `net` and that `F+ ∩ F- = ∅`.
    pub fn validate(&self, net: &NoisyOrNetwork) -> Result<()> {
        for s in self.positive.iter().chain(&self.negative) {
            if s.index() >= net.n_symptoms() {
                return Err(Error::UnknownSymptom(s.0 as i64));
            }
        }
        if let Some(d) = self.label {
            if d.index() >= net.n_diseases() {
                return Err(Error::UnknownDisease(d.0 as i64));
            }
        }
        if self
            .positive
            .iter()
            .any(|s| self.negative.binary_search(s).is_ok())
        {
            return Err(Error::InvalidQuery(
                "a symptom is both positive and negative",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn net_n1() -> NoisyOrNetwork {
        let mut b = NetworkBuilder::new();
        b.add_disease(0, "d", 0.1).unwrap();
        b.add_symptom(0, "f", 0.0).unwrap();
        b.add_edge(0, 0, 0.5).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn theta_values() {
        let net = net_n1();
        assert!((net.theta(SymptomId(0), DiseaseId(0)) - core::f64::consts::LN_2).abs() < 1e-12);

        let mut b = NetworkBuilder::new();
        b.add_disease(0, "a", 0.1).unwrap();
        b.add_disease(1, "b", 0.1).unwrap();
        b.add_symptom(0, "f", 0.0).unwrap();
        b.add_edge(0, 0, 0.9).unwrap();
        let net = b.build().unwrap();
        assert!((net.theta(SymptomId(0), DiseaseId(0)) - core::f64::consts::LN_10).abs() < 1e-12);
        assert_eq!(net.theta(SymptomId(0), DiseaseId(1)), 0.0);
    }

    #[test]
    fn parent_sets() {
        let mut b = NetworkBuilder::new();
        for i in 0..6 {
            b.add_disease(i, "", 0.2).unwrap();
        }
        b.add_symptom(0, "f", 0.0).unwrap();
        b.add_symptom(1, "g", 0.0).unwrap();
        b.add_edge(0, 5, 0.3).unwrap();
        b.add_edge(0, 2, 0.3).unwrap();
        let net = b.build().unwrap();
        assert_eq!(
            net.parent_set(SymptomId(0)).unwrap(),
            vec![DiseaseId(2), DiseaseId(5)]
        );
        assert!(net.parent_set(SymptomId(1)).unwrap().is_empty());
        assert_eq!(net.parent_set(SymptomId(7)), Err(Error::UnknownSymptom(7)));
        for s in net.symptom_ids() {
            let by_theta: Vec<_> = net
                .disease_ids()
                .filter(|&d| net.theta(s, d) > 0.0)
                .collect();
            assert_eq!(by_theta, net.parent_set(s).unwrap());
        }
    }

    #[test]
    fn inverse_odds() {
        let mut b = NetworkBuilder::new();
        b.add_disease(0, "", 0.5).unwrap();
        b.add_disease(1, "", 0.1).unwrap();
        b.add_disease(2, "", 0.01).unwrap();
        let net = b.build().unwrap();
        assert_eq!(net.inverse_prior_odds(DiseaseId(0)).unwrap(), 1.0);
        assert!((net.inverse_prior_odds(DiseaseId(1)).unwrap() - 9.0).abs() < 1e-12);
        assert!((net.inverse_prior_odds(DiseaseId(2)).unwrap() - 99.0).abs() < 1e-12);
        assert_eq!(
            net.inverse_prior_odds(DiseaseId(3)),
            Err(Error::UnknownDisease(3))
        );
    }

    #[test]
    fn rejects_invalid_parameters() {
        let mut b = NetworkBuilder::new();
        assert!(matches!(
            b.add_disease(0, "", 1.0),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            b.add_disease(0, "", 0.0),
            Err(Error::Validation(_))
        ));
        b.add_disease(0, "", 0.5).unwrap();
        assert!(matches!(
            b.add_symptom(0, "", 1.0),
            Err(Error::Validation(_))
        ));
        b.add_symptom(0, "", 0.0).unwrap();
        let err = b.add_edge(0, 0, 1.0).unwrap_err();
        assert_eq!(
            err,
            Error::Validation(ValidationError {
                entity: Entity::Edge {
                    symptom: 0,
                    disease: 0
                },
                reason: "P(f+|d+) must lie in (0, 1)"
            })
        );
        assert!(matches!(b.add_edge(0, 9, 0.5), Err(Error::Validation(_))));
        b.add_edge(0, 0, 0.5).unwrap();
        b.add_edge(0, 0, 0.6).unwrap();
        let err = b.build().unwrap_err();
        assert!(matches!(
            err,
            Error::Validation(ValidationError {
                reason: "duplicate edge",
                ..
            })
        ));
    }

    #[test]
    fn query_validation() {
        let net = net_n1();
        assert!(Query::new([SymptomId(0)], [], None).validate(&net).is_ok());
        assert!(Query::new([SymptomId(0)], [SymptomId(0)], None)
            .validate(&net)
            .is_err());
        assert_eq!(
            Query::new([SymptomId(3)], [], None).validate(&net),
            Err(Error::UnknownSymptom(3))
        );
    }
}
