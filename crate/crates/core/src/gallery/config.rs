use std::str::FromStr;

use super::{invalid, AttackMode, GalleryError, Load, Metric, PdeMode, Source};

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, GalleryError> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, GalleryError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(invalid(
            key,
            format!("expected true or false, got `{other}`"),
        )),
    }
}

fn unknown(example: &str, key: &str) -> GalleryError {
    GalleryError::UnknownKey {
        example: example.to_string(),
        key: key.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdlConfig {
    pub n: usize,
    pub m: usize,
    /// Bernoulli probability of a nonzero code entry.
    pub theta: f64,
    pub seed: u64,
}

impl Default for OdlConfig {
    fn default() -> Self {
        Self {
            n: 10,
            m: 300,
            theta: 0.3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub mode: AttackMode,
    pub metric: Metric,
    /// Perturbation radius.
    pub eps: f64,
    /// Hidden width of the classifier.
    pub hidden: usize,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            mode: AttackMode::MaxLoss,
            metric: Metric::L2,
            eps: 0.5,
            hidden: 16,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    /// Number of springs.
    pub d: usize,
    /// Material budget as a fraction of `d`.
    pub v0: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub load: Load,
    /// Generate the design through a small fixed-input network.
    pub dip: bool,
    pub dip_width: usize,
    pub seed: u64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            d: 10,
            v0: 0.5,
            k_min: 0.1,
            k_max: 1.0,
            load: Load::Uniform,
            dip: false,
            dip_width: 8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcrustesConfig {
    pub n: usize,
    pub seed: u64,
}

impl Default for ProcrustesConfig {
    fn default() -> Self {
        Self { n: 5, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeConfig {
    /// Number of sine basis functions.
    pub k: usize,
    /// Number of collocation points.
    pub m: usize,
    pub source: Source,
    pub mode: PdeMode,
    /// Observations of the exact solution used in supervised mode.
    pub n_data: usize,
    pub seed: u64,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            k: 15,
            m: 30,
            source: Source::MinusTwo,
            mode: PdeMode::Pde,
            n_data: 20,
            seed: 1,
        }
    }
}

/// Configuration of one gallery example.
#[derive(Debug, Clone, PartialEq)]
pub enum ExampleConfig {
    Odl(OdlConfig),
    Attack(AttackConfig),
    Topology(TopologyConfig),
    Procrustes(ProcrustesConfig),
    Pde(PdeConfig),
}

impl ExampleConfig {
    /// Default configuration of the named example.
    pub fn default_for(name: &str) -> Result<Self, GalleryError> {
        Ok(match name {
            "odl" => ExampleConfig::Odl(OdlConfig::default()),
            "attack" => ExampleConfig::Attack(AttackConfig::default()),
            "topology" => ExampleConfig::Topology(TopologyConfig::default()),
            "procrustes" => ExampleConfig::Procrustes(ProcrustesConfig::default()),
            "pde" => ExampleConfig::Pde(PdeConfig::default()),
            other => return Err(GalleryError::UnknownExample(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExampleConfig::Odl(_) => "odl",
            ExampleConfig::Attack(_) => "attack",
            ExampleConfig::Topology(_) => "topology",
            ExampleConfig::Procrustes(_) => "procrustes",
            ExampleConfig::Pde(_) => "pde",
        }
    }

    /// Keys accepted by [`ExampleConfig::set`].
    pub fn keys(&self) -> Vec<String> {
        self.entries().into_iter().map(|(k, _)| k).collect()
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), GalleryError> {
        let name = self.name();
        match self {
            ExampleConfig::Odl(c) => match key {
                "n" => c.n = parse(key, value)?,
                "m" => c.m = parse(key, value)?,
                "theta" => c.theta = parse(key, value)?,
                "seed" => c.seed = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
            ExampleConfig::Attack(c) => match key {
                "mode" => {
                    c.mode = AttackMode::from_str(value.trim()).map_err(|r| invalid(key, r))?
                }
                "metric" => {
                    c.metric = Metric::from_str(value.trim()).map_err(|r| invalid(key, r))?
                }
                "eps" => c.eps = parse(key, value)?,
                "hidden" => c.hidden = parse(key, value)?,
                "seed" => c.seed = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
            ExampleConfig::Topology(c) => match key {
                "d" => c.d = parse(key, value)?,
                "v0" => c.v0 = parse(key, value)?,
                "k_min" => c.k_min = parse(key, value)?,
                "k_max" => c.k_max = parse(key, value)?,
                "load" => c.load = Load::from_str(value.trim()).map_err(|r| invalid(key, r))?,
                "dip" => c.dip = parse_bool(key, value)?,
                "dip_width" => c.dip_width = parse(key, value)?,
                "seed" => c.seed = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
            ExampleConfig::Procrustes(c) => match key {
                "n" => c.n = parse(key, value)?,
                "seed" => c.seed = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
            ExampleConfig::Pde(c) => match key {
                "k" => c.k = parse(key, value)?,
                "m" => c.m = parse(key, value)?,
                "source" => {
                    c.source = Source::from_str(value.trim()).map_err(|r| invalid(key, r))?
                }
                "mode" => c.mode = PdeMode::from_str(value.trim()).map_err(|r| invalid(key, r))?,
                "n_data" => c.n_data = parse(key, value)?,
                "seed" => c.seed = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
        }
        Ok(())
    }

    /// Every field as `(key, text)`, in a fixed order; feeding these back
    /// through [`ExampleConfig::set`] reproduces the configuration.
    pub fn entries(&self) -> Vec<(String, String)> {
        let e = |k: &str, v: String| (k.to_string(), v);
        match self {
            ExampleConfig::Odl(c) => vec![
                e("n", c.n.to_string()),
                e("m", c.m.to_string()),
                e("theta", c.theta.to_string()),
                e("seed", c.seed.to_string()),
            ],
            ExampleConfig::Attack(c) => vec![
                e("mode", c.mode.to_string()),
                e("metric", c.metric.to_string()),
                e("eps", c.eps.to_string()),
                e("hidden", c.hidden.to_string()),
                e("seed", c.seed.to_string()),
            ],
            ExampleConfig::Topology(c) => vec![
                e("d", c.d.to_string()),
                e("v0", c.v0.to_string()),
                e("k_min", c.k_min.to_string()),
                e("k_max", c.k_max.to_string()),
                e("load", c.load.to_string()),
                e("dip", c.dip.to_string()),
                e("dip_width", c.dip_width.to_string()),
                e("seed", c.seed.to_string()),
            ],
            ExampleConfig::Procrustes(c) => {
                vec![e("n", c.n.to_string()), e("seed", c.seed.to_string())]
            }
            ExampleConfig::Pde(c) => vec![
                e("k", c.k.to_string()),
                e("m", c.m.to_string()),
                e("source", c.source.to_string()),
                e("mode", c.mode.to_string()),
                e("n_data", c.n_data.to_string()),
                e("seed", c.seed.to_string()),
            ],
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExampleConfig::Odl(c) => c.seed,
            ExampleConfig::Attack(c) => c.seed,
            ExampleConfig::Topology(c) => c.seed,
            ExampleConfig::Procrustes(c) => c.seed,
            ExampleConfig::Pde(c) => c.seed,
        }
    }

    /// Checks the configuration without building the problem.
    pub fn validate(&self) -> Result<(), GalleryError> {
        match self {
            ExampleConfig::Odl(c) => c.validate(),
            ExampleConfig::Attack(c) => c.validate(),
            ExampleConfig::Topology(c) => c.validate(),
            ExampleConfig::Procrustes(c) => c.validate(),
            ExampleConfig::Pde(c) => c.validate(),
        }
    }
}

impl OdlConfig {
    pub fn validate(&self) -> Result<(), GalleryError> {
        if self.n < 2 {
            return Err(invalid("n", format!("must be at least 2, got {}", self.n)));
        }
        let needed = 10.0 * self.n as f64 * (self.n as f64).ln();
        if (self.m as f64) < needed {
            return Err(invalid(
                "m",
                format!("must be at least 10 n ln n = {needed:.1}, got {}", self.m),
            ));
        }
        if !(self.theta > 0.0 && self.theta <= 0.5) {
            return Err(invalid(
                "theta",
                format!("must lie in (0, 0.5], got {}", self.theta),
            ));
        }
        Ok(())
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), GalleryError> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid(
                "eps",
                format!("must be positive, got {}", self.eps),
            ));
        }
        if self.hidden == 0 {
            return Err(invalid("hidden", "must be at least 1"));
        }
        Ok(())
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<(), GalleryError> {
        if self.d < 2 {
            return Err(invalid("d", format!("must be at least 2, got {}", self.d)));
        }
        if !(self.v0 > 0.0 && self.v0 <= 1.0) {
            return Err(invalid(
                "v0",
                format!("must lie in (0, 1], got {}", self.v0),
            ));
        }
        if !(self.k_min > 0.0) {
            return Err(invalid(
                "k_min",
                format!("must be positive, got {}", self.k_min),
            ));
        }
        if !(self.k_max > self.k_min && self.k_max.is_finite()) {
            return Err(invalid(
                "k_max",
                format!("must exceed k_min = {}, got {}", self.k_min, self.k_max),
            ));
        }
        if self.dip && self.dip_width == 0 {
            return Err(invalid("dip_width", "must be at least 1"));
        }
        Ok(())
    }
}

impl ProcrustesConfig {
    pub fn validate(&self) -> Result<(), GalleryError> {
        if self.n < 2 {
            return Err(invalid("n", format!("must be at least 2, got {}", self.n)));
        }
        Ok(())
    }
}

impl PdeConfig {
    pub fn validate(&self) -> Result<(), GalleryError> {
        if self.k < 2 {
            return Err(invalid("k", format!("must be at least 2, got {}", self.k)));
        }
        if self.m < self.k {
            return Err(invalid(
                "m",
                format!("must be at least k = {}, got {}", self.k, self.m),
            ));
        }
        if self.mode == PdeMode::Supervised && self.n_data == 0 {
            return Err(invalid("n_data", "must be at least 1 in supervised mode"));
        }
        Ok(())
    }
}
