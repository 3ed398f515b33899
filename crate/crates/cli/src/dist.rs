use charquant::charfns::DistSpec;
use clap::{Args, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Gaussian,
    /// Symmetric stable with alpha = 1.
    Cauchy,
    Student,
    Stable,
    Sgh,
    /// Conditioned part P of the Lévy area at unit time.
    LevyAreaP,
    /// Lévy area L = X + Δt·P (sample only).
    LevyArea,
    CustomVg,
}

/// Distribution selection shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct DistArgs {
    /// Distribution family.
    #[arg(value_enum)]
    pub dist: Option<Family>,
    /// Full spec as JSON, e.g. '{"dist":"stable","alpha":1.5}'.
    #[arg(long, conflicts_with = "dist")]
    pub spec: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Student degrees of freedom.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Lévy-area radius parameter.
    #[arg(long)]
    pub r: Option<f64>,
    /// Quantile of c·X instead of X.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

impl DistArgs {
    fn given(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("mu", self.mu),
            ("nu", self.nu),
            ("lambda", self.lambda),
            ("delta", self.delta),
            ("r", self.r),
        ]
    }

    fn check_flags(&self, family: Family, allowed: &[&str]) -> Result<(), String> {
        for (name, v) in self.given() {
            if v.is_some() && !allowed.contains(&name) {
                return Err(format!(
                    "--{name} does not apply to {}",
                    family.to_possible_value().expect("named").get_name()
                ));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Option<Family> {
        self.dist
    }

    /// The catalog spec; `levy-area` maps to its conditioned part.
    pub fn to_spec(&self) -> Result<DistSpec, String> {
        if let Some(text) = &self.spec {
            if self.given().iter().any(|(_, v)| v.is_some()) {
                return Err("--spec cannot be combined with parameter flags".into());
            }
            return DistSpec::parse_json(text).map_err(|e| format!("bad --spec: {e}"));
        }
        let family = self
            .dist
            .ok_or("name a distribution or pass --spec")?;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                format!(
                    "{} needs --{name}",
                    family.to_possible_value().expect("named").get_name()
                )
            })
        };
        let spec = match family {
            Family::Gaussian => {
                self.check_flags(family, &["mu"])?;
                DistSpec::Gaussian {
                    mu: self.mu.unwrap_or(0.0),
                }
            }
            Family::Cauchy => {
                self.check_flags(family, &[])?;
                DistSpec::Stable {
                    alpha: 1.0,
                    beta: 0.0,
                }
            }
            Family::Student => {
                self.check_flags(family, &["nu"])?;
                DistSpec::Student {
                    n: need(self.nu, "nu")?,
                }
            }
            Family::Stable => {
                self.check_flags(family, &["alpha", "beta"])?;
                DistSpec::Stable {
                    alpha: need(self.alpha, "alpha")?,
                    beta: self.beta.unwrap_or(0.0),
                }
            }
            Family::Sgh => {
                self.check_flags(family, &["lambda", "alpha", "delta"])?;
                DistSpec::Sgh {
                    lambda: need(self.lambda, "lambda")?,
                    alpha: need(self.alpha, "alpha")?,
                    delta: need(self.delta, "delta")?,
                }
            }
            Family::LevyAreaP | Family::LevyArea => {
                self.check_flags(family, &["r"])?;
                DistSpec::LevyAreaP {
                    r: need(self.r, "r")?,
                }
            }
            Family::CustomVg => {
                self.check_flags(family, &["lambda", "alpha"])?;
                DistSpec::CustomVg {
                    lambda: need(self.lambda, "lambda")?,
                    alpha: self.alpha.unwrap_or(1.0),
                }
            }
        };
        Ok(spec)
    }
}
