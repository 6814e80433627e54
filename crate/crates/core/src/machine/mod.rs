//! Declarative machine descriptions.
//!
//! A machine file is TOML with a closed schema: unknown keys are errors and
//! every key carries its unit in its name. See `docs/machine-file.md`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Duplex {
    Full,
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapPolicy {
    IntelNoOverlap,
    ZenPartialOverlap,
}

impl fmt::Display for OverlapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverlapPolicy::IntelNoOverlap => "intel_no_overlap",
            OverlapPolicy::ZenPartialOverlap => "zen_partial_overlap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheLevelSpec {
    pub name: String,
    pub size_bytes: u64,
    pub ways: u64,
    pub line_size_bytes: u64,
    pub write_allocate: bool,
    pub write_back: bool,
    /// Fills from memory bypass this level; it only receives evictions from above.
    pub victim: bool,
    /// Lines evicted here are back-invalidated in the levels above.
    pub inclusive: bool,
    /// Bandwidth to the next-closer level. Not used for the first level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upstream_bandwidth_bytes_per_cycle: Option<f64>,
    pub duplex: Duplex,
}

impl CacheLevelSpec {
    pub fn sets(&self) -> u64 {
        self.size_bytes / (self.ways * self.line_size_bytes)
    }

    pub fn lines(&self) -> u64 {
        self.size_bytes / self.line_size_bytes
    }

    /// A fully-associative variant of this level (one set).
    pub fn fully_associative(&self) -> CacheLevelSpec {
        CacheLevelSpec {
            ways: self.lines(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortModel {
    pub vector_bits: u32,
    pub fma: bool,
    pub fp_ports: u32,
    pub load_ports: u32,
    pub store_ports: u32,
    pub load_width_bits: u32,
    pub store_width_bits: u32,
    /// Count loads and stores against one shared budget instead of taking the larger.
    #[serde(default)]
    pub serialize_load_store: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySpec {
    pub bandwidth_numa_domain_bytes_per_s: f64,
    pub bandwidth_socket_bytes_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineModel {
    pub name: String,
    pub clock_hz: f64,
    pub cores_per_socket: u32,
    pub cores_per_numa_domain: u32,
    pub overlap_policy: OverlapPolicy,
    #[serde(default)]
    pub compiler_flags: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    pub memory: MemorySpec,
    pub ports: PortModel,
    pub cache: Vec<CacheLevelSpec>,
}

pub const LEVEL_COUNT: usize = 3;

impl MachineModel {
    pub fn levels(&self) -> &[CacheLevelSpec] {
        &self.cache
    }

    pub fn level(&self, name: &str) -> Option<&CacheLevelSpec> {
        self.cache.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn line_size(&self) -> u64 {
        self.cache[0].line_size_bytes
    }

    pub fn numa_domains(&self) -> u32 {
        self.cores_per_socket / self.cores_per_numa_domain
    }

    /// Memory bandwidth available to one NUMA domain, in bytes per cycle.
    pub fn mem_bytes_per_cycle(&self) -> f64 {
        self.memory.bandwidth_numa_domain_bytes_per_s / self.clock_hz
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, reason: String| Err(Error::validation(field, reason));
        if self.name.trim().is_empty() {
            return fail("name", "must not be empty".into());
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return fail("clock_hz", format!("must be positive, got {}", self.clock_hz));
        }
        if self.cores_per_socket == 0 {
            return fail("cores_per_socket", "must be at least 1".into());
        }
        if self.cores_per_numa_domain == 0 || !self.cores_per_socket.is_multiple_of(self.cores_per_numa_domain) {
            return fail(
                "cores_per_numa_domain",
                format!(
                    "{} does not divide cores_per_socket = {}",
                    self.cores_per_numa_domain, self.cores_per_socket
                ),
            );
        }
        for (field, bw) in [
            (
                "memory.bandwidth_numa_domain_bytes_per_s",
                self.memory.bandwidth_numa_domain_bytes_per_s,
            ),
            (
                "memory.bandwidth_socket_bytes_per_s",
                self.memory.bandwidth_socket_bytes_per_s,
            ),
        ] {
            if !(bw.is_finite() && bw > 0.0) {
                return fail(field, format!("must be positive, got {bw}"));
            }
        }
        if self.memory.bandwidth_numa_domain_bytes_per_s > self.memory.bandwidth_socket_bytes_per_s {
            return fail(
                "memory.bandwidth_numa_domain_bytes_per_s",
                "exceeds the full-socket bandwidth".into(),
            );
        }
        self.validate_ports()?;
        self.validate_caches()
    }

    fn validate_ports(&self) -> Result<()> {
        let p = &self.ports;
        let fail = |field: &str, reason: &str| Err(Error::validation(field, reason));
        if p.vector_bits == 0 || !p.vector_bits.is_multiple_of(32) {
            return fail("ports.vector_bits", "must be a positive multiple of 32");
        }
        if p.load_ports == 0 {
            return fail("ports.load_ports", "must be at least 1");
        }
        if p.store_ports == 0 {
            return fail("ports.store_ports", "must be at least 1");
        }
        if p.load_width_bits == 0 || !p.load_width_bits.is_multiple_of(32) {
            return fail("ports.load_width_bits", "must be a positive multiple of 32");
        }
        if p.store_width_bits == 0 || !p.store_width_bits.is_multiple_of(32) {
            return fail("ports.store_width_bits", "must be a positive multiple of 32");
        }
        Ok(())
    }

    fn validate_caches(&self) -> Result<()> {
        if self.cache.len() != LEVEL_COUNT {
            return Err(Error::validation(
                "cache",
                format!("expected {LEVEL_COUNT} levels (L1, L2, L3), found {}", self.cache.len()),
            ));
        }
        let line = self.cache[0].line_size_bytes;
        for (n, c) in self.cache.iter().enumerate() {
            let field = |f: &str| format!("cache[{n}].{f}");
            if c.name.trim().is_empty() {
                return Err(Error::validation(field("name"), "must not be empty"));
            }
            if c.line_size_bytes == 0 || !c.line_size_bytes.is_power_of_two() {
                return Err(Error::validation(
                    field("line_size_bytes"),
                    format!("{} is not a power of two", c.line_size_bytes),
                ));
            }
            if c.line_size_bytes != line {
                return Err(Error::validation(
                    field("line_size_bytes"),
                    "all levels must share one line size",
                ));
            }
            if c.ways == 0 {
                return Err(Error::validation(field("ways"), "must be at least 1"));
            }
            if c.size_bytes == 0 || c.size_bytes % (c.ways * c.line_size_bytes) != 0 {
                return Err(Error::validation(
                    field("size_bytes"),
                    format!(
                        "{} is not a positive multiple of ways * line_size_bytes = {}",
                        c.size_bytes,
                        c.ways * c.line_size_bytes
                    ),
                ));
            }
            if n > 0 && c.size_bytes <= self.cache[n - 1].size_bytes {
                return Err(Error::validation(
                    field("size_bytes"),
                    format!(
                        "{} is not larger than the level above ({})",
                        c.size_bytes,
                        self.cache[n - 1].size_bytes
                    ),
                ));
            }
            match (n, c.upstream_bandwidth_bytes_per_cycle) {
                (0, None) => {}
                (_, Some(bw)) if bw.is_finite() && bw > 0.0 => {}
                (_, Some(bw)) => {
                    return Err(Error::validation(
                        field("upstream_bandwidth_bytes_per_cycle"),
                        format!("must be positive, got {bw}"),
                    ))
                }
                (_, None) => {
                    return Err(Error::validation(
                        field("upstream_bandwidth_bytes_per_cycle"),
                        "required for every level below L1",
                    ))
                }
            }
            if c.victim && n != LEVEL_COUNT - 1 {
                return Err(Error::validation(
                    field("victim"),
                    "only the last level may be a victim cache",
                ));
            }
            if c.victim && c.inclusive {
                return Err(Error::validation(
                    field("inclusive"),
                    "a victim cache cannot be inclusive",
                ));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("serializing machine: {e}")))
    }
}

/// Parses and validates machine-file text. `origin` names the source in errors.
pub fn parse_machine(text: &str, origin: &str) -> Result<MachineModel> {
    let machine: MachineModel = toml::from_str(text).map_err(|source| Error::MachineParse {
        path: origin.into(),
        source,
    })?;
    machine.validate()?;
    Ok(machine)
}

pub fn load_machine(path: impl AsRef<Path>) -> Result<MachineModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_machine(&text, &path.display().to_string())
}

/// Machine files shipped with the crate, by short name.
pub const BUILTIN_MACHINES: [(&str, &str); 5] = [
    ("hsw", include_str!("../../machines/hsw.toml")),
    ("bdw", include_str!("../../machines/bdw.toml")),
    ("skx", include_str!("../../machines/skx.toml")),
    ("zen", include_str!("../../machines/zen.toml")),
    ("toy", include_str!("../../machines/toy.toml")),
];

pub fn builtin_machine_text(name: &str) -> Option<&'static str> {
    BUILTIN_MACHINES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Loads `spec` as a path, falling back to a built-in machine of that name.
/// Returns the model and the exact text it was parsed from.
pub fn resolve_machine(spec: &str) -> Result<(MachineModel, String)> {
    let path = Path::new(spec);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return Ok((parse_machine(&text, spec)?, text));
    }
    match builtin_machine_text(spec) {
        Some(text) => Ok((parse_machine(text, spec)?, text.to_string())),
        None => Err(Error::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "no such file and no built-in machine of that name (hsw, bdw, skx, zen, toy)",
            ),
        )),
    }
}

/// Transfer time in cycles per cacheline of work over the link above `level`.
pub fn cycles_per_cl(level: &CacheLevelSpec, load_bytes: f64, store_bytes: f64) -> f64 {
    let bw = match level.upstream_bandwidth_bytes_per_cycle {
        Some(bw) => bw,
        None => return 0.0,
    };
    match level.duplex {
        Duplex::Full => load_bytes.max(store_bytes) / bw,
        Duplex::Half => (load_bytes + store_bytes) / bw,
    }
}

/// Usable capacity for layer conditions.
pub fn effective_size(level: &CacheLevelSpec, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidInput(format!("safety factor {safety} outside (0, 1]")));
    }
    Ok(level.size_bytes as f64 * safety)
}

/// Memory transfer time in cycles for `bytes` per cacheline of work.
pub fn mem_cycles_per_cl(machine: &MachineModel, bytes: f64) -> f64 {
    bytes / machine.mem_bytes_per_cycle()
}
