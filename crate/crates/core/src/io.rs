//! Model container files.
//!
//! ```text
//! deepcent-model 1
//! {"kind":"deepcent", "mode":..., "covariate_names":[...], ...}
//! net main
//! mlp 1
//! ...
//! ```
//!
//! Line two is a JSON header. Network weights follow in named `net` sections
//! using the [`Mlp`] text format; Weibull fits live entirely in the header.

use std::fs;
use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::Mode;
use crate::error::{Error, Result};
use crate::models::{
    CrDeepCentConfig, CrDeepCentModel, CrNet, DeepCentConfig, DeepCentModel, Standardizer, SurvivalModel,
};
use crate::nn::Mlp;
use crate::rng::SeededRng;
use crate::weibull::{CrWeibullModel, WeibullModel};

const MAGIC: &str = "deepcent-model 1";

/// Any model the CLI and FFI can train, save and load.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Deepcent(DeepCentModel),
    CrDeepcent(CrDeepCentModel),
    Weibull {
        model: WeibullModel,
        covariate_names: Vec<String>,
    },
    CrWeibull {
        model: CrWeibullModel,
        covariate_names: Vec<String>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Header {
    Deepcent {
        mode: Mode,
        covariate_names: Vec<String>,
        standardizer: Standardizer,
        config: DeepCentConfig,
    },
    CrDeepcent {
        mode: Mode,
        covariate_names: Vec<String>,
        standardizer: Standardizer,
        config: CrDeepCentConfig,
    },
    Weibull {
        mode: Mode,
        covariate_names: Vec<String>,
        model: WeibullModel,
    },
    CrWeibull {
        mode: Mode,
        covariate_names: Vec<String>,
        model: CrWeibullModel,
    },
}

impl AnyModel {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Deepcent(_) => "deepcent",
            AnyModel::CrDeepcent(_) => "cr-deepcent",
            AnyModel::Weibull { .. } => "weibull",
            AnyModel::CrWeibull { .. } => "cr-weibull",
        }
    }

    pub fn covariate_names(&self) -> &[String] {
        match self {
            AnyModel::Deepcent(m) => &m.covariate_names,
            AnyModel::CrDeepcent(m) => &m.covariate_names,
            AnyModel::Weibull { covariate_names, .. } | AnyModel::CrWeibull { covariate_names, .. } => {
                covariate_names
            }
        }
    }

    fn inner(&self) -> &dyn SurvivalModel {
        match self {
            AnyModel::Deepcent(m) => m,
            AnyModel::CrDeepcent(m) => m,
            AnyModel::Weibull { model, .. } => model,
            AnyModel::CrWeibull { model, .. } => model,
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let (header, nets): (Header, Vec<(&str, &Mlp)>) = match self {
            AnyModel::Deepcent(m) => (
                Header::Deepcent {
                    mode: Mode::Noncompeting,
                    covariate_names: m.covariate_names.clone(),
                    standardizer: m.standardizer.clone(),
                    config: m.config.clone(),
                },
                vec![("main", &m.net)],
            ),
            AnyModel::CrDeepcent(m) => (
                Header::CrDeepcent {
                    mode: Mode::Competing,
                    covariate_names: m.covariate_names.clone(),
                    standardizer: m.standardizer.clone(),
                    config: m.config.clone(),
                },
                vec![("trunk", &m.net.trunk), ("head1", &m.net.head1), ("head2", &m.net.head2)],
            ),
            AnyModel::Weibull { model, covariate_names } => (
                Header::Weibull {
                    mode: Mode::Noncompeting,
                    covariate_names: covariate_names.clone(),
                    model: model.clone(),
                },
                vec![],
            ),
            AnyModel::CrWeibull { model, covariate_names } => (
                Header::CrWeibull {
                    mode: Mode::Competing,
                    covariate_names: covariate_names.clone(),
                    model: model.clone(),
                },
                vec![],
            ),
        };
        let json = serde_json::to_string(&header).map_err(|e| Error::Format(format!("header: {e}")))?;
        let mut out = format!("{MAGIC}\n{json}\n");
        for (name, net) in nets {
            out.push_str(&format!("net {name}\n"));
            out.push_str(&net.to_text());
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err(Error::Format(format!("missing `{MAGIC}` header line")));
        }
        let json = lines.next().ok_or_else(|| Error::Format("missing JSON header".into()))?;
        let header: Header = serde_json::from_str(json).map_err(|e| Error::Format(format!("header: {e}")))?;

        let mut sections: Vec<(String, String)> = Vec::new();
        for line in lines {
            if let Some(name) = line.strip_prefix("net ") {
                sections.push((name.trim().to_string(), String::new()));
            } else if let Some((_, body)) = sections.last_mut() {
                body.push_str(line);
                body.push('\n');
            } else if !line.trim().is_empty() {
                return Err(Error::Format(format!("unexpected line before any net section: `{line}`")));
            }
        }
        let mut take = |name: &str| -> Result<Mlp> {
            let i = sections
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| Error::Format(format!("missing net section `{name}`")))?;
            Mlp::from_text(&sections.remove(i).1)
        };
        let check_mode = |got: Mode, want: Mode| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Format(format!("header mode {got} does not match model kind")))
            }
        };

        let model = match header {
            Header::Deepcent {
                mode,
                covariate_names,
                standardizer,
                config,
            } => {
                check_mode(mode, Mode::Noncompeting)?;
                let net = take("main")?;
                if !net.is_regression_head() || net.input_width() != standardizer.width() {
                    return Err(Error::Format("network shape does not match header".into()));
                }
                AnyModel::Deepcent(DeepCentModel {
                    config,
                    net,
                    standardizer,
                    covariate_names,
                    loss_trace: Vec::new(),
                })
            }
            Header::CrDeepcent {
                mode,
                covariate_names,
                standardizer,
                config,
            } => {
                check_mode(mode, Mode::Competing)?;
                let net = CrNet::new(take("trunk")?, take("head1")?, take("head2")?)?;
                if net.input_width() != standardizer.width() {
                    return Err(Error::Format("network shape does not match header".into()));
                }
                AnyModel::CrDeepcent(CrDeepCentModel {
                    config,
                    net,
                    standardizer,
                    covariate_names,
                    loss_trace: Vec::new(),
                })
            }
            Header::Weibull {
                mode,
                covariate_names,
                model,
            } => {
                check_mode(mode, Mode::Noncompeting)?;
                AnyModel::Weibull { model, covariate_names }
            }
            Header::CrWeibull {
                mode,
                covariate_names,
                model,
            } => {
                check_mode(mode, Mode::Competing)?;
                AnyModel::CrWeibull { model, covariate_names }
            }
        };
        if let Some((name, _)) = sections.first() {
            return Err(Error::Format(format!("unexpected net section `{name}`")));
        }
        if model.covariate_names().len() != model.covariate_width() {
            return Err(Error::Format("covariate names do not match model width".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

impl SurvivalModel for AnyModel {
    fn mode(&self) -> Mode {
        self.inner().mode()
    }

    fn covariate_width(&self) -> usize {
        self.inner().covariate_width()
    }

    fn predict_all(&self, x: ArrayView2<f64>) -> Result<Vec<Vec<f64>>> {
        self.inner().predict_all(x)
    }

    fn sample_all(&self, x: ArrayView2<f64>, rng: &mut SeededRng) -> Result<Vec<Vec<f64>>> {
        self.inner().sample_all(x, rng)
    }
}

impl From<DeepCentModel> for AnyModel {
    fn from(m: DeepCentModel) -> Self {
        AnyModel::Deepcent(m)
    }
}

impl From<CrDeepCentModel> for AnyModel {
    fn from(m: CrDeepCentModel) -> Self {
        AnyModel::CrDeepcent(m)
    }
}
