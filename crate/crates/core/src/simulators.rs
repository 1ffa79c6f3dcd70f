//! The black-box functions being emulated.
//!
//! Built-in toy maps and the nine-band fixture are pure functions. External codes run
//! as a child process speaking newline-delimited JSON over stdin/stdout: each request
//! is `{"id": n, "x": [...]}` and the reply `{"id": n, "y": [...]}`.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Exchange, Result};
use crate::space::Bounds;

const EMBEDDED_FIXTURE: &str = include_str!("../fixtures/fixture-9band-v1.json");
/// Box shared by the built-in toy maps.
pub const TOY_BOUNDS: [f64; 2] = [0.1, 10.0];

fn default_timeout() -> f64 {
    300.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SimulatorSpec {
    /// `[log x, 0.5 log 3x]` on `[0.1, 10]`.
    #[serde(rename = "toy-log-1d")]
    ToyLog1d {},
    /// `[log |x|, 0.5 log 3|x|]` on `[0.1, 10]^2`.
    #[serde(rename = "toy-log-2d")]
    ToyLog2d {},
    /// Nine smooth outputs over the first `input_dim` fixture inputs.
    #[serde(rename = "fixture-9band")]
    Fixture9band {
        input_dim: usize,
        /// Coefficient file; the bundled version when absent.
        #[serde(default)]
        fixture: Option<PathBuf>,
    },
    External {
        command: Vec<String>,
        bounds: Bounds,
        output_dim: usize,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureInput {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub default: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ridge {
    pub amplitude: f64,
    pub weights: Vec<f64>,
    pub center: f64,
    pub steepness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub name: String,
    pub offset: f64,
    pub ridges: Vec<Ridge>,
}

/// Coefficients of the nine-band map: `y_b = offset_b + sum a * logistic(s * (w . u - c))`
/// with `u` the inputs scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub version: u32,
    #[serde(default)]
    pub description: String,
    pub inputs: Vec<FixtureInput>,
    pub bands: Vec<Band>,
}

impl Fixture {
    pub fn bundled() -> Self {
        serde_json::from_str(EMBEDDED_FIXTURE).expect("bundled fixture parses")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: Fixture = serde_json::from_str(&text)?;
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let n = self.inputs.len();
        for i in &self.inputs {
            if !(i.min < i.max) || !(i.min..=i.max).contains(&i.default) {
                return Err(Error::Config(format!("fixture input {} has a bad range", i.name)));
            }
        }
        for b in &self.bands {
            if b.ridges.iter().any(|r| r.weights.len() != n) {
                return Err(Error::Config(format!(
                    "fixture band {} has ridge weights of the wrong length",
                    b.name
                )));
            }
        }
        Ok(())
    }

    pub fn bounds(&self, input_dim: usize) -> Result<Bounds> {
        Bounds::new(self.inputs[..input_dim].iter().map(|i| [i.min, i.max]).collect())
    }

    /// Evaluates all bands; inputs beyond `x.len()` take their defaults.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = self
            .inputs
            .iter()
            .enumerate()
            .map(|(d, i)| (x.get(d).copied().unwrap_or(i.default) - i.min) / (i.max - i.min))
            .collect();
        self.bands
            .iter()
            .map(|b| {
                b.offset
                    + b.ridges
                        .iter()
                        .map(|r| {
                            let z: f64 = r.weights.iter().zip(&u).map(|(w, v)| w * v).sum();
                            r.amplitude / (1.0 + (-r.steepness * (z - r.center)).exp())
                        })
                        .sum::<f64>()
            })
            .collect()
    }
}

enum Backend {
    ToyLog1d,
    ToyLog2d,
    Fixture(Fixture),
    External(Mutex<ExternalProcess>),
}

/// A simulator with an evaluation counter.
pub struct Simulator {
    name: String,
    bounds: Bounds,
    output_dim: usize,
    backend: Backend,
    evaluations: AtomicU64,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("output_dim", &self.output_dim)
            .field("evaluations", &self.evaluations())
            .finish()
    }
}

impl Simulator {
    pub fn from_spec(spec: &SimulatorSpec) -> Result<Self> {
        let toy = |d| Bounds::cube(TOY_BOUNDS[0], TOY_BOUNDS[1], d);
        let (name, bounds, output_dim, backend) = match spec {
            SimulatorSpec::ToyLog1d {} => ("toy-log-1d".to_string(), toy(1)?, 2, Backend::ToyLog1d),
            SimulatorSpec::ToyLog2d {} => ("toy-log-2d".to_string(), toy(2)?, 2, Backend::ToyLog2d),
            SimulatorSpec::Fixture9band { input_dim, fixture } => {
                let fx = match fixture {
                    Some(p) => Fixture::load(p)?,
                    None => Fixture::bundled(),
                };
                if *input_dim < 1 || *input_dim > fx.inputs.len() {
                    return Err(Error::Config(format!(
                        "fixture input_dim must lie in 1..={}, got {input_dim}",
                        fx.inputs.len()
                    )));
                }
                let bounds = fx.bounds(*input_dim)?;
                let p = fx.bands.len();
                ("fixture-9band".to_string(), bounds, p, Backend::Fixture(fx))
            }
            SimulatorSpec::External {
                command,
                bounds,
                output_dim,
                timeout_secs,
            } => {
                if *output_dim == 0 {
                    return Err(Error::Config("external output_dim must be at least 1".into()));
                }
                if !(*timeout_secs > 0.0 && timeout_secs.is_finite()) {
                    return Err(Error::Config("timeout_secs must be positive".into()));
                }
                let proc = ExternalProcess::spawn(command, Duration::from_secs_f64(*timeout_secs))?;
                (
                    format!("external:{}", command.join(" ")),
                    bounds.clone(),
                    *output_dim,
                    Backend::External(Mutex::new(proc)),
                )
            }
        };
        Ok(Self {
            name,
            bounds,
            output_dim,
            backend,
            evaluations: AtomicU64::new(0),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn input_dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Number of `evaluate` calls made so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::SeqCst)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() || !self.bounds.contains(x) {
            return Err(Error::invalid(format!(
                "simulator input {x:?} is outside its bounds {:?}",
                self.bounds.intervals()
            )));
        }
        self.evaluations.fetch_add(1, Ordering::SeqCst);
        match &self.backend {
            Backend::ToyLog1d => Ok(vec![x[0].ln(), 0.5 * (3.0 * x[0]).ln()]),
            Backend::ToyLog2d => {
                let r = crate::space::norm(x);
                Ok(vec![r.ln(), 0.5 * (3.0 * r).ln()])
            }
            Backend::Fixture(f) => Ok(f.evaluate(x)),
            Backend::External(p) => {
                let mut p = p
                    .lock()
                    .map_err(|_| Error::simulator("simulator bridge poisoned by an earlier panic", None))?;
                p.call(x, self.output_dim)
            }
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    x: &'a [f64],
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    y: Vec<f64>,
}

struct ExternalProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    timeout: Duration,
}

impl ExternalProcess {
    fn spawn(command: &[String], timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Config("external simulator command is empty".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::simulator(format!("cannot start `{program}`: {e}"), None))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            next_id: 0,
            timeout,
        })
    }

    fn call(&mut self, x: &[f64], output_dim: usize) -> Result<Vec<f64>> {
        let id = self.next_id;
        self.next_id += 1;
        let request = serde_json::to_string(&Request { id, x })?;
        let fail = |msg: String, response: Option<String>| {
            Error::simulator(
                msg,
                Some(Exchange {
                    request: request.clone(),
                    response,
                }),
            )
        };
        writeln!(self.stdin, "{request}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| fail(format!("cannot write request: {e}"), None))?;
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(fail(format!("cannot read response: {e}"), None)),
            Err(RecvTimeoutError::Timeout) => {
                return Err(fail(
                    format!("no response within {:.1} s", self.timeout.as_secs_f64()),
                    None,
                ))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.try_wait().ok().flatten();
                return Err(fail(
                    format!(
                        "simulator closed its output{}",
                        status.map_or(String::new(), |s| format!(" ({s})"))
                    ),
                    None,
                ));
            }
        };
        let response: Response = serde_json::from_str(&line)
            .map_err(|e| fail(format!("malformed response: {e}"), Some(line.clone())))?;
        if response.id != id {
            return Err(fail(
                format!("response id {} does not match request id {id}", response.id),
                Some(line),
            ));
        }
        if response.y.len() != output_dim {
            return Err(fail(
                format!("expected {output_dim} outputs, got {}", response.y.len()),
                Some(line),
            ));
        }
        if response.y.iter().any(|v| !v.is_finite()) {
            return Err(fail("response contains non-finite outputs".into(), Some(line)));
        }
        Ok(response.y)
    }
}

impl Drop for ExternalProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_values() {
        let s = Simulator::from_spec(&SimulatorSpec::ToyLog1d {}).unwrap();
        let y = s.evaluate(&[1.0]).unwrap();
        assert_eq!(y[0], 0.0);
        assert!((y[1] - 0.549306).abs() < 1e-6);
        let s2 = Simulator::from_spec(&SimulatorSpec::ToyLog2d {}).unwrap();
        let y = s2.evaluate(&[3.0, 4.0]).unwrap();
        assert!((y[0] - 1.609438).abs() < 1e-6 && (y[1] - 1.354025).abs() < 1e-6);
        assert_eq!(s.evaluations(), 1);
        assert_eq!(s2.input_dim(), 2);
    }

    #[test]
    fn out_of_bounds_is_invalid() {
        let s = Simulator::from_spec(&SimulatorSpec::ToyLog1d {}).unwrap();
        assert!(matches!(s.evaluate(&[0.0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(s.evaluate(&[1.0, 1.0]), Err(Error::InvalidArgument(_))));
        assert_eq!(s.evaluations(), 0);
    }

    #[test]
    fn fixture_shapes_and_determinism() {
        for d in [2, 3] {
            let s = Simulator::from_spec(&SimulatorSpec::Fixture9band {
                input_dim: d,
                fixture: None,
            })
            .unwrap();
            assert_eq!(s.output_dim(), 9);
            assert_eq!(s.input_dim(), d);
            let x: Vec<f64> = (0..d).map(|i| s.bounds().low(i) + 0.37 * s.bounds().width(i)).collect();
            let a = s.evaluate(&x).unwrap();
            let b = s.evaluate(&x).unwrap();
            assert_eq!(a.len(), 9);
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        assert!(Simulator::from_spec(&SimulatorSpec::Fixture9band {
            input_dim: 4,
            fixture: None
        })
        .is_err());
    }

    #[test]
    fn fixture_defaults_fill_missing_inputs() {
        let f = Fixture::bundled();
        let two = f.evaluate(&[45.0, 3.5]);
        let three = f.evaluate(&[45.0, 3.5, 0.007]);
        assert_eq!(two, three);
    }

    #[test]
    fn spec_parsing() {
        let s: SimulatorSpec = serde_json::from_str(r#"{"kind": "toy-log-1d"}"#).unwrap();
        assert_eq!(s, SimulatorSpec::ToyLog1d {});
        let e: SimulatorSpec = serde_json::from_str(
            r#"{"kind": "external", "command": ["sim"], "bounds": [[0, 1]], "output_dim": 2}"#,
        )
        .unwrap();
        assert!(matches!(e, SimulatorSpec::External { timeout_secs, .. } if timeout_secs == 300.0));
        assert!(serde_json::from_str::<SimulatorSpec>(r#"{"kind": "toy-log-1d", "x": 1}"#).is_err());
    }
}
