use crate::site::{FeatureProps, SignalColor, SignalPhase, SiteMap};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("unknown signal head `{0}`")]
    UnknownHead(String),
}

/// Fixed-time program of one signal head.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalProgram {
    pub phases: Vec<SignalPhase>,
    pub offset: f64,
}

impl SignalProgram {
    pub fn cycle(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    /// Color at time `t` seconds.
    pub fn color_at(&self, t: f64) -> SignalColor {
        let cycle = self.cycle();
        let mut local = (t + self.offset).rem_euclid(cycle);
        for p in &self.phases {
            if local < p.duration {
                return p.color;
            }
            local -= p.duration;
        }
        self.phases
            .last()
            .map(|p| p.color)
            .unwrap_or(SignalColor::Red)
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.phases.iter().any(|p| !(p.duration > 0.0)) {
            out.push("phase durations must be positive".to_string());
        }
        for (color, name) in [(SignalColor::Green, "green"), (SignalColor::Red, "red")] {
            let n = self.phases.iter().filter(|p| p.color == color).count();
            if n != 1 {
                out.push(format!("program needs exactly one {name} phase, found {n}"));
            }
        }
        if self
            .phases
            .iter()
            .filter(|p| p.color == SignalColor::Yellow)
            .count()
            > 1
        {
            out.push("program has more than one yellow phase".to_string());
        }
        out
    }
}

/// Signal programs keyed by signal head id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignalPrograms(pub BTreeMap<String, SignalProgram>);

impl SignalPrograms {
    pub fn from_site(site: &SiteMap) -> SignalPrograms {
        SignalPrograms(
            site.features
                .iter()
                .filter_map(|f| match &f.props {
                    FeatureProps::SignalHead(s) => Some((
                        f.id.clone(),
                        SignalProgram {
                            phases: s.phases.clone(),
                            offset: s.offset,
                        },
                    )),
                    _ => None,
                })
                .collect(),
        )
    }

    /// `(head id, message)` for every invalid program.
    pub fn problems(&self) -> Vec<(String, String)> {
        self.0
            .iter()
            .flat_map(|(id, p)| p.problems().into_iter().map(move |m| (id.clone(), m)))
            .collect()
    }
}

/// Color shown by `head` at `t` seconds (pure).
pub fn signal_state(
    programs: &SignalPrograms,
    head: &str,
    t: f64,
) -> Result<SignalColor, SignalError> {
    programs
        .0
        .get(head)
        .map(|p| p.color_at(t))
        .ok_or_else(|| SignalError::UnknownHead(head.to_string()))
}
