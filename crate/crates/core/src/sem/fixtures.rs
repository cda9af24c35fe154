use std::collections::BTreeMap;

use super::{Gaussian, SemKind, SemSpec};
use crate::error::{Error, Result};
use crate::graph::Dag;

pub const FIXTURE_NAMES: [&str; 5] = ["earthquake", "asia", "user1", "user2", "wine_synth"];

/// A named ground truth plus what a simulated expert needs to know about it.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub experiment_name: String,
    pub spec: SemSpec,
    pub descriptions: BTreeMap<String, String>,
    /// Latent node -> the name an expert should suggest for it.
    pub confounder_names: BTreeMap<String, String>,
    /// Prior handed out for latent nodes.
    pub prior: Option<Gaussian>,
    /// Wrong confounder names used by a noisy simulated expert.
    pub distractors: Vec<String>,
}

fn weighted(vars: &[&str], edges: &[(&str, &str, f64)], latents: &[&str]) -> Dag {
    let names: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
    let pos = |n: &str| vars.iter().position(|v| *v == n).expect("fixture name");
    let e: Vec<(usize, usize)> = edges.iter().map(|(a, b, _)| (pos(a), pos(b))).collect();
    let w: Vec<f64> = edges.iter().map(|(_, _, w)| *w).collect();
    let latent = vars.iter().map(|v| latents.contains(v)).collect();
    Dag::new(names, &e, latent, Some(w)).expect("fixture is a DAG")
}

fn logistic(vars: &[&str], edges: &[(&str, &str)], roots_p: f64) -> SemSpec {
    // strong effects so conditional independences show at a few hundred rows
    let dag = weighted(vars, &edges.iter().map(|&(a, b)| (a, b, 3.0)).collect::<Vec<_>>(), &[]);
    let mut intercepts = BTreeMap::new();
    for (v, name) in vars.iter().enumerate() {
        let k = dag.parents(v).len();
        let b = match k {
            0 => (roots_p / (1.0 - roots_p)).ln(),
            1 => -1.5,
            _ => -1.5 * k as f64,
        };
        intercepts.insert(name.to_string(), b);
    }
    SemSpec { dag, kind: SemKind::Logistic, roots: BTreeMap::new(), noise_variance: 1.0, intercepts }
}

fn describe(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

/// Built-in ground truths.
pub fn fixture(name: &str) -> Result<Fixture> {
    let f = match name {
        "earthquake" => {
            let vars = ["Burglary", "Earthquake", "Alarm", "JohnCalls", "MaryCalls"];
            let edges = [
                ("Burglary", "Alarm"),
                ("Earthquake", "Alarm"),
                ("Alarm", "JohnCalls"),
                ("Alarm", "MaryCalls"),
            ];
            Fixture {
                name: name.into(),
                experiment_name: "a home alarm system".into(),
                spec: logistic(&vars, &edges, 0.3),
                descriptions: describe(&[
                    ("Burglary", "a burglary happens"),
                    ("Earthquake", "an earthquake happens"),
                    ("Alarm", "the home alarm goes off"),
                    ("JohnCalls", "neighbour John calls"),
                    ("MaryCalls", "neighbour Mary calls"),
                ]),
                confounder_names: BTreeMap::new(),
                prior: None,
                distractors: Vec::new(),
            }
        }
        "asia" => {
            let vars = [
                "VisitToAsia",
                "Tuberculosis",
                "Smoking",
                "LungCancer",
                "Bronchitis",
                "Either",
                "XRay",
                "Dyspnea",
            ];
            let edges = [
                ("VisitToAsia", "Tuberculosis"),
                ("Smoking", "LungCancer"),
                ("Smoking", "Bronchitis"),
                ("Tuberculosis", "Either"),
                ("LungCancer", "Either"),
                ("Either", "XRay"),
                ("Either", "Dyspnea"),
                ("Bronchitis", "Dyspnea"),
            ];
            Fixture {
                name: name.into(),
                experiment_name: "lung disease diagnosis".into(),
                spec: logistic(&vars, &edges, 0.3),
                descriptions: describe(&[
                    ("VisitToAsia", "recent visit to Asia"),
                    ("Tuberculosis", "patient has tuberculosis"),
                    ("Smoking", "patient smokes"),
                    ("LungCancer", "patient has lung cancer"),
                    ("Bronchitis", "patient has bronchitis"),
                    ("Either", "tuberculosis or lung cancer"),
                    ("XRay", "positive chest X-ray"),
                    ("Dyspnea", "shortness of breath"),
                ]),
                confounder_names: BTreeMap::new(),
                prior: None,
                distractors: Vec::new(),
            }
        }
        "user1" => {
            let vars = [
                "ProximityToTransaction",
                "AddToCart",
                "ProductClicks",
                "SessionsIos",
                "PromoHitsAndroid",
                "CheapProductsViewed",
                "PageHits",
                "TimeSpentPerSession",
                "PromoHitsOthers",
            ];
            let edges = [
                ("ProximityToTransaction", "AddToCart", 0.12),
                ("AddToCart", "ProductClicks", 0.24),
                ("AddToCart", "SessionsIos", 0.18),
                ("AddToCart", "PromoHitsAndroid", 0.38),
                ("AddToCart", "CheapProductsViewed", 0.52),
                ("AddToCart", "PageHits", 0.40),
                ("ProductClicks", "SessionsIos", 0.23),
                ("ProductClicks", "PromoHitsAndroid", 0.15),
                ("ProductClicks", "CheapProductsViewed", 0.32),
                ("ProductClicks", "PageHits", 0.15),
                ("PromoHitsAndroid", "CheapProductsViewed", 0.13),
                ("PromoHitsAndroid", "PageHits", 0.32),
                ("PromoHitsAndroid", "TimeSpentPerSession", 0.17),
                ("PromoHitsAndroid", "PromoHitsOthers", 0.63),
                ("CheapProductsViewed", "PageHits", 0.25),
                ("CheapProductsViewed", "PromoHitsOthers", 0.29),
                ("PageHits", "TimeSpentPerSession", 0.65),
                ("PageHits", "PromoHitsOthers", 0.11),
                ("TimeSpentPerSession", "PromoHitsOthers", -0.09),
            ];
            let dag = weighted(&vars, &edges, &[]);
            let roots = BTreeMap::from([("ProximityToTransaction".to_string(), Gaussian::new(10.0, 1.0))]);
            Fixture {
                name: name.into(),
                experiment_name: "online shopping user behaviour".into(),
                spec: SemSpec::linear(dag, roots, 0.05)?,
                descriptions: describe(&[
                    ("ProximityToTransaction", "how close the session is to a purchase"),
                    ("AddToCart", "number of add-to-cart events"),
                    ("ProductClicks", "number of product clicks"),
                    ("SessionsIos", "number of sessions on iOS"),
                    ("PromoHitsAndroid", "number of promotion hits on Android"),
                    ("CheapProductsViewed", "number of cheap products viewed"),
                    ("PageHits", "number of page hits"),
                    ("TimeSpentPerSession", "time spent per session"),
                    ("PromoHitsOthers", "number of promotion hits on other platforms"),
                ]),
                confounder_names: BTreeMap::new(),
                prior: None,
                distractors: Vec::new(),
            }
        }
        "user2" => {
            let vars = [
                "UniqueUrls",
                "Hits",
                "TimeSpent",
                "ActiveDaysLastMonth",
                "SessionsLastMonth",
                "HitsLastMonth",
                "PageHitsLastMonth",
                "SocialNetworkHits",
            ];
            let edges = [
                ("UniqueUrls", "Hits", 0.87),
                ("Hits", "TimeSpent", 0.61),
                ("ActiveDaysLastMonth", "TimeSpent", -0.71),
                ("SessionsLastMonth", "TimeSpent", 0.94),
                ("PageHitsLastMonth", "UniqueUrls", 0.19),
                ("SessionsLastMonth", "ActiveDaysLastMonth", 1.11),
                ("HitsLastMonth", "ActiveDaysLastMonth", 0.46),
                ("PageHitsLastMonth", "ActiveDaysLastMonth", -0.62),
                ("UniqueUrls", "SessionsLastMonth", -0.11),
                ("PageHitsLastMonth", "SessionsLastMonth", 0.90),
                ("PageHitsLastMonth", "HitsLastMonth", 1.06),
                ("Hits", "SocialNetworkHits", 1.0),
            ];
            let dag = weighted(&vars, &edges, &[]);
            let roots = BTreeMap::from([("PageHitsLastMonth".to_string(), Gaussian::new(27.0, 10.5))]);
            Fixture {
                name: name.into(),
                experiment_name: "website visitor engagement".into(),
                spec: SemSpec::linear(dag, roots, 0.05)?,
                descriptions: describe(&[
                    ("UniqueUrls", "number of unique URLs visited"),
                    ("Hits", "number of hits"),
                    ("TimeSpent", "time spent on the site"),
                    ("ActiveDaysLastMonth", "total active days last month"),
                    ("SessionsLastMonth", "number of sessions last month"),
                    ("HitsLastMonth", "number of hits last month"),
                    ("PageHitsLastMonth", "number of page hits last month"),
                    ("SocialNetworkHits", "number of hits on social networks"),
                ]),
                confounder_names: BTreeMap::new(),
                prior: None,
                distractors: Vec::new(),
            }
        }
        "wine_synth" => {
            let vars = ["ResidualSugar", "Density", "VolatileAcidity", "TotalSulfurDioxide", "Quality", "Alcohol"];
            // latent weights chosen so corr(Alcohol, Density) = -0.50 and
            // corr(Alcohol, Quality) = 0.48 under the roots and noise below
            let edges = [
                ("ResidualSugar", "Density", 0.4),
                ("ResidualSugar", "TotalSulfurDioxide", 0.5),
                ("Alcohol", "Density", -0.369_685),
                ("VolatileAcidity", "Quality", -1.0),
                ("Quality", "TotalSulfurDioxide", 0.3),
                ("Alcohol", "Quality", 0.294_655),
            ];
            let dag = weighted(&vars, &edges, &["Alcohol"]);
            let roots = BTreeMap::from([
                ("ResidualSugar".to_string(), Gaussian::new(2.5, 1.0)),
                ("VolatileAcidity".to_string(), Gaussian::new(0.5, 0.04)),
                ("Alcohol".to_string(), Gaussian::new(11.0, 1.0)),
            ]);
            Fixture {
                name: name.into(),
                experiment_name: "red wine quality".into(),
                spec: SemSpec::linear(dag, roots, 0.25)?,
                descriptions: describe(&[
                    ("ResidualSugar", "residual sugar"),
                    ("Density", "density of the wine"),
                    ("VolatileAcidity", "volatile acidity"),
                    ("TotalSulfurDioxide", "total sulfur dioxide"),
                    ("Quality", "quality score"),
                ]),
                confounder_names: BTreeMap::from([("Alcohol".to_string(), "alcohol_content".to_string())]),
                prior: Some(Gaussian::new(11.0, 1.0)),
                distractors: [
                    "grape_quality",
                    "grape_maturity",
                    "grape_ripeness",
                    "grape_type",
                    "wine_age",
                    "sugar_content",
                    "acidity_level",
                    "vineyard",
                ]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            }
        }
        other => return Err(Error::UnknownFixture(other.to_string())),
    };
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fixtures_load() {
        for n in FIXTURE_NAMES {
            let f = fixture(n).unwrap();
            f.spec.validate().unwrap();
            assert_eq!(f.name, n);
        }
        assert!(matches!(fixture("child"), Err(Error::UnknownFixture(_))));
    }

    #[test]
    fn earthquake_edges() {
        let f = fixture("earthquake").unwrap();
        let d = &f.spec.dag;
        let named: Vec<(String, String)> = d
            .edges()
            .into_iter()
            .map(|(a, b)| (d.variables()[a].clone(), d.variables()[b].clone()))
            .collect();
        assert_eq!(named.len(), 4);
        assert!(named.contains(&("Burglary".into(), "Alarm".into())));
        assert!(named.contains(&("Alarm".into(), "MaryCalls".into())));
    }

    #[test]
    fn user1_weight() {
        let d = fixture("user1").unwrap().spec.dag;
        let (a, b) = (d.index_of("PageHits").unwrap(), d.index_of("TimeSpentPerSession").unwrap());
        assert_eq!(d.weight(a, b), Some(0.65));
    }

    #[test]
    fn wine_latent_and_correlations() {
        let f = fixture("wine_synth").unwrap();
        let d = &f.spec.dag;
        let l = d.index_of("Alcohol").unwrap();
        assert!(d.is_latent(l));
        let dens = d.index_of("Density").unwrap();
        let qual = d.index_of("Quality").unwrap();
        assert!((f.spec.implied_correlation(l, dens).unwrap() + 0.50).abs() < 1e-4);
        assert!((f.spec.implied_correlation(l, qual).unwrap() - 0.48).abs() < 1e-4);
    }
}
