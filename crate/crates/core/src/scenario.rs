//! Scenario files: a line-oriented `key = value` format with `[section]`
//! headers. See `docs/FORMATS.md` for the grammar.

use std::fmt::Write as _;
use std::path::Path as FsPath;

use thiserror::Error;

use crate::diagnostics::Check;
use crate::flux::{FluxError, FluxModel};
use crate::mesh::UniformGrid;
use crate::multi::Problem;
use crate::scheme::{InitialDatum, SchemeConfig};
use crate::trajectory::{
    check_no_transversal_crossing, ConstraintProfile, InterfaceSpec, Path, TrajectoryError,
};

/// Position/time tolerance when matching interface endpoints to a
/// declared crossing.
pub const CROSSING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {reason}")]
pub struct ValidationError {
    pub field: String,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FluxSpec {
    Quadratic,
    /// Samples of `f''` on a uniform grid of `[0, 1]`.
    Tabulated(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub lambda: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPreset {
    Constant(f64),
    Indicator { a: f64, b: f64, value: f64 },
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl InitialPreset {
    pub fn datum(&self) -> InitialDatum {
        match self {
            Self::Constant(v) => InitialDatum::Constant(*v),
            Self::Indicator { a, b, value } => InitialDatum::Indicator {
                a: *a,
                b: *b,
                value: *value,
            },
            Self::Piecewise { breaks, values } => InitialDatum::Piecewise {
                breaks: breaks.clone(),
                values: values.clone(),
            },
        }
    }
}

/// A declared meeting point: the `incoming` interfaces end there and the
/// `outgoing` ones start there.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub time: f64,
    pub position: f64,
    pub incoming: Vec<u32>,
    pub outgoing: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub snapshots: Vec<f64>,
    pub diagnostics: Vec<Check>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            snapshots: Vec::new(),
            diagnostics: Check::all().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub flux: FluxSpec,
    pub domain: Domain,
    pub initial: InitialPreset,
    pub interfaces: Vec<InterfaceSpec>,
    pub crossings: Vec<Crossing>,
    pub output: OutputSpec,
}

impl Scenario {
    pub fn model(&self) -> Result<FluxModel, FluxError> {
        match &self.flux {
            FluxSpec::Quadratic => Ok(FluxModel::quadratic()),
            FluxSpec::Tabulated(c) => FluxModel::tabulated(c.clone()),
        }
    }

    /// The scenario with the mesh size divided by `factor`.
    pub fn refined(&self, factor: u32) -> Scenario {
        let mut out = self.clone();
        out.domain.dx /= f64::from(factor);
        out
    }

    pub fn problem(&self) -> Result<Problem, ValidationError> {
        let model = self.model().map_err(|e| invalid("flux", e))?;
        let d = &self.domain;
        let grid = UniformGrid::new(d.x_min, d.x_max, d.dx).map_err(|e| invalid("domain", e))?;
        Ok(Problem {
            model,
            grid,
            lambda: d.lambda,
            horizon: d.horizon,
            initial: self.initial.datum(),
            interfaces: self.interfaces.clone(),
        })
    }

    /// Checks every parameter against the solver's requirements.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let model = self.model().map_err(|e| invalid("flux.curvature", e))?;
        let d = &self.domain;
        for (name, v) in [
            ("domain.x_min", d.x_min),
            ("domain.x_max", d.x_max),
            ("domain.dx", d.dx),
            ("domain.lambda", d.lambda),
            ("domain.horizon", d.horizon),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if !(d.dx > 0.0) {
            return Err(invalid("domain.dx", "must be positive"));
        }
        if !(d.horizon > 0.0) {
            return Err(invalid("domain.horizon", "must be positive"));
        }
        UniformGrid::new(d.x_min, d.x_max, d.dx).map_err(|e| invalid("domain", e))?;
        self.validate_initial()?;

        let mut ids: Vec<u32> = self.interfaces.iter().map(|i| i.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid("interface.id", format!("duplicate id {}", w[0])));
        }
        let mut speed: f64 = 0.0;
        for spec in &self.interfaces {
            let field = format!("interface.{}", spec.id);
            spec.validate(&model).map_err(|e| match e {
                TrajectoryError::InvalidSpec { reason, .. } => invalid(&field, reason),
                other => invalid(&field, other),
            })?;
            let margin = 2.0 * d.dx;
            if spec
                .path
                .points()
                .iter()
                .any(|&(_, y)| y <= d.x_min + margin || y >= d.x_max - margin)
            {
                return Err(invalid(&field, "path leaves the domain interior"));
            }
            speed = speed.max(spec.path.max_speed());
        }
        for (k, a) in self.interfaces.iter().enumerate() {
            for b in &self.interfaces[k + 1..] {
                check_no_transversal_crossing(a, b)
                    .map_err(|e| invalid(&format!("interface.{}", a.id), e))?;
            }
        }
        let config = SchemeConfig {
            dx: d.dx,
            lambda: d.lambda,
            speed_bound: model.lipschitz() + speed,
            horizon: d.horizon,
        };
        config.validate().map_err(|e| invalid("domain.lambda", e))?;
        for (k, c) in self.crossings.iter().enumerate() {
            self.validate_crossing(c)
                .map_err(|reason| invalid(&format!("crossing.{k}"), reason))?;
        }
        let snaps = &self.output.snapshots;
        if snaps.iter().any(|t| !(*t >= 0.0 && *t <= d.horizon)) {
            return Err(invalid("output.snapshots", "times must lie in [0, horizon]"));
        }
        if snaps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("output.snapshots", "times must be increasing"));
        }
        Ok(())
    }

    fn validate_initial(&self) -> Result<(), ValidationError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(name, format!("density {v} outside [0, 1]")))
            }
        };
        match &self.initial {
            InitialPreset::Constant(v) => unit("initial.value", *v),
            InitialPreset::Indicator { a, b, value } => {
                unit("initial.value", *value)?;
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(invalid("initial", "indicator needs a < b"));
                }
                Ok(())
            }
            InitialPreset::Piecewise { breaks, values } => {
                for v in values {
                    unit("initial.values", *v)?;
                }
                if values.len() != breaks.len() + 1 {
                    return Err(invalid(
                        "initial.values",
                        "needs exactly one more value than breaks",
                    ));
                }
                if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("initial.breaks", "must be finite and increasing"));
                }
                Ok(())
            }
        }
    }

    fn validate_crossing(&self, c: &Crossing) -> Result<(), String> {
        if c.incoming.is_empty() || c.outgoing.is_empty() {
            return Err("needs incoming and outgoing interfaces".into());
        }
        let find = |id: u32| {
            self.interfaces
                .iter()
                .find(|i| i.id == id)
                .ok_or(format!("unknown interface {id}"))
        };
        let near = |(t, y): (f64, f64)| {
            (t - c.time).abs() <= CROSSING_TOL && (y - c.position).abs() <= CROSSING_TOL
        };
        for &id in &c.incoming {
            let pts = find(id)?.path.points();
            if !near(pts[pts.len() - 1]) {
                return Err(format!("interface {id} does not end at the crossing"));
            }
        }
        for &id in &c.outgoing {
            if !near(find(id)?.path.points()[0]) {
                return Err(format!("interface {id} does not start at the crossing"));
            }
        }
        Ok(())
    }

    pub fn load(path: &FsPath) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let scenario = parse_scenario(&text)?;
        scenario.validate()?;
        Ok(scenario)
    }
}

fn invalid(field: &str, reason: impl ToString) -> ValidationError {
    ValidationError {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Flux,
    Domain,
    Initial,
    Interface,
    Crossing,
    Output,
}

impl Section {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "flux" => Self::Flux,
            "domain" => Self::Domain,
            "initial" => Self::Initial,
            "interface" => Self::Interface,
            "crossing" => Self::Crossing,
            "output" => Self::Output,
            _ => return None,
        })
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Self::Flux => &["kind", "curvature"],
            Self::Domain => &["x_min", "x_max", "dx", "lambda", "horizon"],
            Self::Initial => &["preset", "value", "a", "b", "breaks", "values"],
            Self::Interface => &["id", "path", "constraint"],
            Self::Crossing => &["time", "position", "incoming", "outgoing"],
            Self::Output => &["snapshots", "diagnostics"],
        }
    }

    fn repeatable(self) -> bool {
        matches!(self, Self::Interface | Self::Crossing)
    }
}

struct Block {
    section: Section,
    line: usize,
    entries: Vec<(usize, String, String)>,
}

impl Block {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.entries
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.as_str()))
    }

    fn require(&self, key: &str) -> Result<(usize, &str), ParseError> {
        self.get(key).ok_or_else(|| ParseError {
            line: self.line,
            message: format!("missing key `{key}`"),
        })
    }

    fn number(&self, key: &str) -> Result<f64, ParseError> {
        let (line, v) = self.require(key)?;
        parse_number(line, v)
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ParseError> {
        let (line, v) = self.require(key)?;
        parse_list(line, v, |s| parse_number(line, s))
    }

    fn ids(&self, key: &str) -> Result<Vec<u32>, ParseError> {
        let (line, v) = self.require(key)?;
        parse_list(line, v, |s| parse_id(line, s))
    }
}

fn parse_number(line: usize, s: &str) -> Result<f64, ParseError> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ParseError {
            line,
            message: format!("expected a finite number, found `{}`", s.trim()),
        }),
    }
}

fn parse_id(line: usize, s: &str) -> Result<u32, ParseError> {
    s.trim().parse::<u32>().map_err(|_| ParseError {
        line,
        message: format!("expected an interface id, found `{}`", s.trim()),
    })
}

fn parse_list<T>(
    line: usize,
    s: &str,
    item: impl Fn(&str) -> Result<T, ParseError>,
) -> Result<Vec<T>, ParseError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|part| {
            if part.trim().is_empty() {
                Err(ParseError {
                    line,
                    message: "empty list item".into(),
                })
            } else {
                item(part)
            }
        })
        .collect()
}

/// `t:y` or `t0:t1:q` tuples.
fn parse_tuples(line: usize, s: &str, arity: usize) -> Result<Vec<Vec<f64>>, ParseError> {
    parse_list(line, s, |part| {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != arity {
            return Err(ParseError {
                line,
                message: format!("expected {arity} `:`-separated numbers, found `{}`", part.trim()),
            });
        }
        fields.iter().map(|f| parse_number(line, f)).collect()
    })
}

/// Parses scenario text. Only syntax and value types are checked here; see
/// [`Scenario::validate`] for the physical constraints.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut blocks: Vec<Block> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ParseError {
                line,
                message: "unterminated section header".into(),
            })?;
            let section = Section::from_name(name.trim()).ok_or_else(|| ParseError {
                line,
                message: format!("unknown section `{}`", name.trim()),
            })?;
            if !section.repeatable() && blocks.iter().any(|b| b.section == section) {
                return Err(ParseError {
                    line,
                    message: format!("section `{}` appears twice", name.trim()),
                });
            }
            blocks.push(Block {
                section,
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ParseError {
            line,
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let block = blocks.last_mut().ok_or_else(|| ParseError {
            line,
            message: "entry before any section header".into(),
        })?;
        if !block.section.keys().contains(&key) {
            return Err(ParseError {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        if block.get(key).is_some() {
            return Err(ParseError {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        block.entries.push((line, key.to_string(), value.trim().to_string()));
    }

    let last_line = text.lines().count().max(1);
    let single = |s: Section| blocks.iter().find(|b| b.section == s);
    let need = |s: Section, name: &str| {
        single(s).ok_or_else(|| ParseError {
            line: last_line,
            message: format!("missing section `[{name}]`"),
        })
    };

    let flux = match single(Section::Flux) {
        None => FluxSpec::Quadratic,
        Some(b) => {
            let (line, kind) = b.require("kind")?;
            match kind {
                "quadratic" => {
                    if let Some((l, _)) = b.get("curvature") {
                        return Err(ParseError {
                            line: l,
                            message: "`curvature` only applies to tabulated fluxes".into(),
                        });
                    }
                    FluxSpec::Quadratic
                }
                "tabulated" => FluxSpec::Tabulated(b.list("curvature")?),
                other => {
                    return Err(ParseError {
                        line,
                        message: format!("unknown flux kind `{other}`"),
                    })
                }
            }
        }
    };

    let b = need(Section::Domain, "domain")?;
    let domain = Domain {
        x_min: b.number("x_min")?,
        x_max: b.number("x_max")?,
        dx: b.number("dx")?,
        lambda: b.number("lambda")?,
        horizon: b.number("horizon")?,
    };

    let b = need(Section::Initial, "initial")?;
    let (line, preset) = b.require("preset")?;
    let allowed: &[&str] = match preset {
        "constant" => &["preset", "value"],
        "indicator" => &["preset", "a", "b", "value"],
        "piecewise" => &["preset", "breaks", "values"],
        other => {
            return Err(ParseError {
                line,
                message: format!("unknown preset `{other}`"),
            })
        }
    };
    if let Some((l, k, _)) = b.entries.iter().find(|(_, k, _)| !allowed.contains(&k.as_str())) {
        return Err(ParseError {
            line: *l,
            message: format!("key `{k}` does not apply to preset `{preset}`"),
        });
    }
    let initial = match preset {
        "constant" => InitialPreset::Constant(b.number("value")?),
        "indicator" => InitialPreset::Indicator {
            a: b.number("a")?,
            b: b.number("b")?,
            value: b.number("value")?,
        },
        _ => InitialPreset::Piecewise {
            breaks: b.list("breaks")?,
            values: b.list("values")?,
        },
    };

    let mut interfaces = Vec::new();
    for b in blocks.iter().filter(|b| b.section == Section::Interface) {
        let (line, id) = b.require("id")?;
        let id = parse_id(line, id)?;
        let (line, path) = b.require("path")?;
        let points = parse_tuples(line, path, 2)?
            .into_iter()
            .map(|p| (p[0], p[1]))
            .collect();
        let (line, c) = b.require("constraint")?;
        let segments = parse_tuples(line, c, 3)?
            .into_iter()
            .map(|p| (p[0], p[1], p[2]))
            .collect();
        interfaces.push(InterfaceSpec::new(
            id,
            Path::new(points),
            ConstraintProfile::new(segments),
        ));
    }

    let mut crossings = Vec::new();
    for b in blocks.iter().filter(|b| b.section == Section::Crossing) {
        crossings.push(Crossing {
            time: b.number("time")?,
            position: b.number("position")?,
            incoming: b.ids("incoming")?,
            outgoing: b.ids("outgoing")?,
        });
    }

    let mut output = OutputSpec::default();
    if let Some(b) = single(Section::Output) {
        if b.get("snapshots").is_some() {
            output.snapshots = b.list("snapshots")?;
        }
        if let Some((line, v)) = b.get("diagnostics") {
            output.diagnostics = match v {
                "all" => Check::all().to_vec(),
                "none" => Vec::new(),
                _ => parse_list(line, v, |s| {
                    Check::from_name(s.trim()).ok_or_else(|| ParseError {
                        line,
                        message: format!("unknown check `{}`", s.trim()),
                    })
                })?,
            };
        }
    }

    Ok(Scenario {
        flux,
        domain,
        initial,
        interfaces,
        crossings,
        output,
    })
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

/// Canonical text form. Numbers use the shortest representation that
/// parses back to the same `f64`, so `parse ∘ serialize` is the identity.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let num = |v: &f64| format!("{v:?}");
    out.push_str("[flux]\n");
    match &s.flux {
        FluxSpec::Quadratic => out.push_str("kind = quadratic\n"),
        FluxSpec::Tabulated(c) => {
            let _ = writeln!(out, "kind = tabulated\ncurvature = {}", join(c, num));
        }
    }
    let d = &s.domain;
    let _ = writeln!(
        out,
        "\n[domain]\nx_min = {:?}\nx_max = {:?}\ndx = {:?}\nlambda = {:?}\nhorizon = {:?}",
        d.x_min, d.x_max, d.dx, d.lambda, d.horizon
    );
    out.push_str("\n[initial]\n");
    match &s.initial {
        InitialPreset::Constant(v) => {
            let _ = writeln!(out, "preset = constant\nvalue = {v:?}");
        }
        InitialPreset::Indicator { a, b, value } => {
            let _ = writeln!(out, "preset = indicator\na = {a:?}\nb = {b:?}\nvalue = {value:?}");
        }
        InitialPreset::Piecewise { breaks, values } => {
            let _ = writeln!(
                out,
                "preset = piecewise\nbreaks = {}\nvalues = {}",
                join(breaks, num),
                join(values, num)
            );
        }
    }
    for i in &s.interfaces {
        let _ = writeln!(
            out,
            "\n[interface]\nid = {}\npath = {}\nconstraint = {}",
            i.id,
            join(i.path.points(), |(t, y)| format!("{t:?}:{y:?}")),
            join(i.constraint.segments(), |(a, b, q)| format!("{a:?}:{b:?}:{q:?}")),
        );
    }
    for c in &s.crossings {
        let _ = writeln!(
            out,
            "\n[crossing]\ntime = {:?}\nposition = {:?}\nincoming = {}\noutgoing = {}",
            c.time,
            c.position,
            join(&c.incoming, |i| i.to_string()),
            join(&c.outgoing, |i| i.to_string()),
        );
    }
    let diagnostics = if s.output.diagnostics.is_empty() {
        "none".to_string()
    } else if s.output.diagnostics == Check::all() {
        "all".to_string()
    } else {
        join(&s.output.diagnostics, |c| c.name().to_string())
    };
    let _ = writeln!(
        out,
        "\n[output]\nsnapshots = {}\ndiagnostics = {}",
        join(&s.output.snapshots, num),
        diagnostics
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOW: &str = "\
# tow truck
[domain]
x_min = 0
x_max = 12
dx = 0.02
lambda = 0.38
horizon = 10

[initial]
preset = indicator
a = 1
b = 3
value = 0.8

[interface]
id = 1
path = 0:2.5, 6.3:2.5
constraint = 0:6.3:0.125

[interface]
id = 2
path = 0:0.61, 6.3:2.5   # approaching
constraint = 0:6.3:0.1

[interface]
id = 3
path = 6.3:2.5, 8:2.5, 10:3.1
constraint = 6.3:10:0.1

[crossing]
time = 6.3
position = 2.5
incoming = 1, 2
outgoing = 3

[output]
snapshots = 2, 5.8, 6.3, 7.44, 8, 10
";

    #[test]
    fn parses_and_validates() {
        let s = parse_scenario(TOW).unwrap();
        assert_eq!(s.flux, FluxSpec::Quadratic);
        assert_eq!(s.interfaces.len(), 3);
        assert_eq!(s.interfaces[2].path.points()[2], (10.0, 3.1));
        assert_eq!(s.crossings[0].incoming, vec![1, 2]);
        assert_eq!(s.output.diagnostics.len(), 9);
        s.validate().unwrap();
    }

    #[test]
    fn round_trip_is_exact() {
        let s = parse_scenario(TOW).unwrap();
        let text = serialize_scenario(&s);
        let again = parse_scenario(&text).unwrap();
        assert_eq!(s, again);
        assert_eq!(serialize_scenario(&again), text);
    }

    #[test]
    fn inadmissible_constraint_rejected() {
        let text = TOW.replace("0:6.3:0.125", "0:6.3:0.3");
        let err = parse_scenario(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field, "interface.1");
    }

    #[test]
    fn decreasing_path_rejected() {
        let text = TOW.replace("0:0.61, 6.3:2.5", "0:0.61, 3:0.5, 6.3:2.5");
        let err = parse_scenario(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field, "interface.2");
        assert!(err.reason.contains("decreasing"));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse_scenario("[domain]\nx_min = zero\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_scenario("[domain]\nfoo = 1\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_scenario("x = 1\n").unwrap_err();
        assert_eq!(err.line, 1);
        let err = parse_scenario("[domain]\n[domain]\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_scenario(&TOW.replace("incoming = 1, 2", "incoming = 1,,2")).unwrap_err();
        assert!(err.message.contains("empty"));
    }

    #[test]
    fn crossing_must_match_endpoints() {
        let text = TOW.replace("position = 2.5", "position = 2.6");
        let err = parse_scenario(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field, "crossing.0");
    }
}
