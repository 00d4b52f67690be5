//! Command-line options, the JSON config file, and their resolution into a
//! validated [`RunConfig`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tomoprop_core::io::OutputFormat;
use tomoprop_core::{Error, GreenFunction, GreenKind, Potential, Result, Route, StateSpec, UniformGrid};

/// Potential as given on the command line: `free`, `harmonic`, or
/// `alpha=A,beta=B` for `V(x) = αx + βx²`.
pub fn parse_potential(s: &str) -> Result<Potential> {
    let s = s.trim();
    match s {
        "free" => return Ok(Potential::FREE),
        "harmonic" | "oscillator" => return Ok(Potential::HARMONIC),
        _ => {}
    }
    let bad = || Error::InvalidInput(format!("unrecognized potential '{s}'"));
    let (mut alpha, mut beta) = (0.0, 0.0);
    for part in s.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        if !value.is_finite() {
            return Err(bad());
        }
        match key.trim() {
            "alpha" => alpha = value,
            "beta" => beta = value,
            _ => return Err(bad()),
        }
    }
    Ok(Potential::new(alpha, beta))
}

/// A list of numbers: `a,b,c` or `lower:upper:count` (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Text(String),
}

impl Values {
    pub fn resolve(&self, name: &str) -> Result<Vec<f64>> {
        let bad = |s: &str| Error::InvalidInput(format!("{name}: cannot parse '{s}'"));
        let v = match self {
            Values::List(v) => v.clone(),
            Values::Text(s) => {
                let parts: Vec<&str> = s.split(':').collect();
                match parts[..] {
                    [lo, hi, n] => {
                        let lo: f64 = lo.trim().parse().map_err(|_| bad(s))?;
                        let hi: f64 = hi.trim().parse().map_err(|_| bad(s))?;
                        let n: usize = n.trim().parse().map_err(|_| bad(s))?;
                        match n {
                            0 => return Err(bad(s)),
                            1 => vec![lo],
                            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
                        }
                    }
                    [list] => list
                        .split(',')
                        .map(|a| a.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad(s))?,
                    _ => return Err(bad(s)),
                }
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("{name}: expected finite values")));
        }
        Ok(v)
    }
}

impl FromStr for Values {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(Values::Text(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RouteArg {
    Pullback,
    Green,
    Pde,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Free,
    Oscillator,
    VanFleck,
    Sliced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

/// Every option that may come from a flag or from the config file. Flags
/// take precedence; keys in the file are the long flag names with
/// underscores.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// JSON config file; flags override its entries.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Output path; the metadata sidecar is written next to it.
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Output encoding [default: from the output extension].
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// State: ho_ground, ho:N, gaussian:x0,p0,sigma, or a+b (equal weights).
    #[arg(long)]
    pub state: Option<String>,

    /// Input tomogram file (CSV or JSON) instead of --state.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,

    /// free, harmonic, or alpha=A,beta=B for V = A x + B x^2.
    #[arg(long, allow_hyphen_values = true)]
    pub potential: Option<String>,

    /// Evolution time.
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,

    #[arg(long, value_enum)]
    pub route: Option<RouteArg>,

    /// Green-function kind.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,

    /// Time slices for the sliced Green function.
    #[arg(long)]
    pub slices: Option<usize>,

    /// Tomogram X grid is [-x_half_width, x_half_width].
    #[arg(long)]
    pub x_half_width: Option<f64>,

    #[arg(long)]
    pub x_count: Option<usize>,

    /// Angles on [0, pi).
    #[arg(long)]
    pub theta_count: Option<usize>,

    /// Position grid is [-position_half_width, position_half_width].
    #[arg(long)]
    pub position_half_width: Option<f64>,

    #[arg(long)]
    pub position_count: Option<usize>,

    /// Angular width of the small-sin(theta) limit in the forward transform.
    #[arg(long)]
    pub eps_theta: Option<f64>,

    /// Truncation |mu| <= M of the inversion integral.
    #[arg(long)]
    pub mu_max: Option<f64>,

    #[arg(long)]
    pub mu_count: Option<usize>,

    /// Gaussian damping exp(-d mu^2) of the inversion; automatic if unset.
    #[arg(long)]
    pub mu_damping: Option<f64>,

    /// Kernel regularization exp(-eps (z^2 + a^2)).
    #[arg(long)]
    pub eps: Option<f64>,

    /// Kernel integration domain half-width [default: automatic].
    #[arg(long)]
    pub domain_half_width: Option<f64>,

    #[arg(long)]
    pub domain_step: Option<f64>,

    /// Green-function x samples (a,b,c or lower:upper:count).
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<Values>,

    /// Green-function y samples.
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<Values>,

    /// Kernel scan lattice.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<Values>,

    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<Values>,

    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<Values>,

    #[arg(long, allow_hyphen_values = true)]
    pub mu_p: Option<Values>,

    #[arg(long, allow_hyphen_values = true)]
    pub nu_p: Option<Values>,

    /// Write the optical tomogram at these angles instead of the full tomogram.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<Values>,
}

macro_rules! overlay {
    ($flags:ident, $file:ident; $($field:ident),* $(,)?) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field; } )*
    };
}

impl Options {
    /// Fills options not given as flags from the `--config` file.
    pub fn merged(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
        let file: Options =
            serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))?;
        overlay!(self, file; output, format, state, input, potential, t, route, kind, slices,
            x_half_width, x_count, theta_count, position_half_width, position_count, eps_theta,
            mu_max, mu_count, mu_damping, eps, domain_half_width, domain_step, x, y, k, mu, nu,
            mu_p, nu_p, phi);
        Ok(self)
    }
}

/// Resolved and validated configuration; recorded verbatim in metadata.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub potential: Potential,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green: Option<GreenFunction>,
    pub x_grid: UniformGrid,
    pub theta_count: usize,
    pub position_grid: UniformGrid,
    pub eps_theta: f64,
    pub mu_max: f64,
    pub mu_count: usize,
    pub mu_damping: Option<f64>,
    pub eps: f64,
    pub domain_half_width: Option<f64>,
    pub domain_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn count(name: &str, v: usize) -> Result<usize> {
    if v >= 8 {
        Ok(v)
    } else {
        Err(Error::InvalidInput(format!("{name} must be at least 8, got {v}")))
    }
}

fn required<T>(name: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| Error::InvalidInput(format!("missing required option --{}", name.replace('_', "-"))))
}

impl RunConfig {
    pub fn resolve(command: &'static str, o: &Options) -> Result<Self> {
        let potential = parse_potential(o.potential.as_deref().unwrap_or("free"))?;
        let state = match (&o.state, &o.input) {
            (Some(_), Some(_)) => return Err(Error::InvalidInput("--state and --input are mutually exclusive".into())),
            (Some(s), None) => Some(s.parse::<StateSpec>()?),
            (None, Some(_)) => None,
            (None, None) => Some(StateSpec::ground()),
        };
        if let Some(p) = &o.input {
            if !p.is_file() {
                return Err(Error::InvalidInput(format!(
                    "input file {} does not exist",
                    p.display()
                )));
            }
        }
        let t = match o.t {
            Some(t) if !t.is_finite() => return Err(Error::InvalidInput(format!("non-finite time {t}"))),
            t => t,
        };
        let x_half = positive("x_half_width", o.x_half_width.unwrap_or(12.0))?;
        let pos_half = positive("position_half_width", o.position_half_width.unwrap_or(12.0))?;
        let x_grid = UniformGrid::symmetric(x_half, count("x_count", o.x_count.unwrap_or(512))?)?;
        let position_grid =
            UniformGrid::symmetric(pos_half, count("position_count", o.position_count.unwrap_or(512))?)?;
        let theta_count = count("theta_count", o.theta_count.unwrap_or(128))?;
        let mu_count = count("mu_count", o.mu_count.unwrap_or(801))?;
        if let Some(d) = o.mu_damping {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::InvalidInput(format!("mu_damping must be nonnegative, got {d}")));
            }
        }
        let route = o.route.map(|r| route_for(r, &potential)).transpose()?;
        let green = match o.kind {
            Some(kind) => Some(green_for(kind, potential, o.slices)?),
            None => None,
        };
        let format = match (o.format, &o.output) {
            (Some(f), _) => f.into(),
            (None, Some(p)) => OutputFormat::from_path(p),
            (None, None) => OutputFormat::Csv,
        };
        Ok(Self {
            command,
            output: o.output.clone(),
            format,
            state,
            input: o.input.clone(),
            potential,
            t,
            route,
            green,
            x_grid,
            theta_count,
            position_grid,
            eps_theta: positive("eps_theta", o.eps_theta.unwrap_or(1e-3))?,
            mu_max: positive("mu_max", o.mu_max.unwrap_or(40.0))?,
            mu_count,
            mu_damping: o.mu_damping,
            eps: positive("eps", o.eps.unwrap_or(1e-3))?,
            domain_half_width: o
                .domain_half_width
                .map(|h| positive("domain_half_width", h))
                .transpose()?,
            domain_step: positive("domain_step", o.domain_step.unwrap_or(0.125))?,
            phi: o.phi.as_ref().map(|p| p.resolve("phi")).transpose()?,
        })
    }

    pub fn time(&self) -> Result<f64> {
        required("t", self.t)
    }

    pub fn output(&self) -> Result<&Path> {
        required("output", self.output.as_deref())
    }
}

fn route_for(route: RouteArg, potential: &Potential) -> Result<Route> {
    match route {
        RouteArg::Pullback => {
            if !(potential.is_free() || potential.is_unit_oscillator()) {
                return Err(Error::UnsupportedPotential(format!(
                    "the pullback route supports only the free particle and the unit oscillator, got {potential}"
                )));
            }
            Ok(Route::Pullback)
        }
        RouteArg::Green => Ok(Route::Green),
        RouteArg::Pde => Ok(Route::Pde),
        RouteArg::Kernel => Err(Error::InvalidInput(
            "the kernel route produces kernel scans, not tomograms; use the `kernel` subcommand".into(),
        )),
    }
}

fn green_for(kind: KindArg, potential: Potential, slices: Option<usize>) -> Result<GreenFunction> {
    let g = match kind {
        KindArg::Free => GreenFunction::free(),
        KindArg::Oscillator => GreenFunction::oscillator(),
        KindArg::VanFleck => GreenFunction::van_fleck(potential),
        KindArg::Sliced => GreenFunction::sliced(potential, slices.unwrap_or(64)),
    };
    if let GreenKind::Sliced { slices: 0, .. } = g.kind {
        return Err(Error::InvalidInput("slices must be positive".into()));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potentials() {
        assert_eq!(parse_potential("free").unwrap(), Potential::FREE);
        assert_eq!(parse_potential("harmonic").unwrap(), Potential::HARMONIC);
        assert_eq!(parse_potential("alpha=1,beta=0.3").unwrap(), Potential::new(1.0, 0.3));
        assert_eq!(parse_potential("beta=0.5").unwrap(), Potential::HARMONIC);
        assert!(parse_potential("gamma=1").is_err());
        assert!(parse_potential("alpha=x").is_err());
    }

    #[test]
    fn value_lists() {
        assert_eq!(Values::Text("1,2.5".into()).resolve("v").unwrap(), vec![1.0, 2.5]);
        assert_eq!(
            Values::Text("-1:1:3".into()).resolve("v").unwrap(),
            vec![-1.0, 0.0, 1.0]
        );
        assert_eq!(Values::List(vec![0.5]).resolve("v").unwrap(), vec![0.5]);
        assert!(Values::Text("1:2".into()).resolve("v").is_err());
        assert!(Values::Text("-1:1:0".into()).resolve("v").is_err());
    }

    #[test]
    fn pullback_rejects_other_potentials() {
        let o = Options {
            route: Some(RouteArg::Pullback),
            potential: Some("alpha=1,beta=0.3".into()),
            ..Default::default()
        };
        assert!(matches!(
            RunConfig::resolve("evolve", &o),
            Err(Error::UnsupportedPotential(_))
        ));
        let o = Options {
            route: Some(RouteArg::Pde),
            ..o
        };
        assert!(RunConfig::resolve("evolve", &o).is_ok());
    }

    #[test]
    fn small_counts_are_rejected() {
        let o = Options {
            theta_count: Some(4),
            ..Default::default()
        };
        assert!(RunConfig::resolve("tomogram", &o).is_err());
    }
}
