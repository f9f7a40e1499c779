//! C ABI for troprelu.
//!
//! Handles are opaque and owned by the caller; free them with the matching
//! `*_free` function. Every function returns a [`TrStatus`]; on failure a
//! message is available from [`tr_last_error_message`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use troprelu::hyperbox::{Hyperbox, Interval};
use troprelu::io::sherlock;
use troprelu::network::{self, AnalysisResult, ChainMode, Domain, InputSubdivision, Layer, Network, Options, Track};
use troprelu::spec_check::{self, LinearAssertion, Status};
use troprelu::subdivision::SubdivisionConfig;
use troprelu::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    EmptyAbstraction = 6,
    CellBudgetExceeded = 7,
    Lp = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrMode {
    Box = 0,
    Zone = 1,
    External = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrDomain {
    Zone = 0,
    Octagon = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrTrack {
    Io = 0,
    All = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrOptions {
    pub mode: TrMode,
    pub domain: TrDomain,
    pub track: TrTrack,
    /// Membership and verdict tolerance.
    pub eps: f64,
    /// Upper bound on subdivision cells.
    pub cell_budget: usize,
}

/// A network under construction or loaded from a file.
pub struct TrNetwork {
    inputs: usize,
    layers: Vec<Layer>,
}

pub struct TrAnalysis {
    result: AnalysisResult,
    network: Network,
    options: Options,
    input_box: Hyperbox,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> TrStatus {
    match e {
        Error::Io(_) => TrStatus::Io,
        Error::MalformedFile(_) | Error::EmptyFile | Error::Json(_) | Error::InvalidSpec(_) => TrStatus::Parse,
        Error::DimensionMismatch { .. } | Error::VariableMismatch(_) | Error::BadIndex(_) => {
            TrStatus::DimensionMismatch
        }
        Error::EmptyAbstraction => TrStatus::EmptyAbstraction,
        Error::CellBudgetExceeded { .. } => TrStatus::CellBudgetExceeded,
        Error::Lp(_) | Error::Unbounded | Error::EmptyFeasibleSet => TrStatus::Lp,
        _ => TrStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (TrStatus, String)>) -> TrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TrStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TrStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (TrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (TrStatus, String) {
    (TrStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (TrStatus, String) {
    (TrStatus::InvalidArgument, msg.into())
}

unsafe fn slice_or_err<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (TrStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread (empty after success).
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn tr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn tr_options_default() -> TrOptions {
    let d = Options::default();
    TrOptions {
        mode: TrMode::Zone,
        domain: TrDomain::Zone,
        track: TrTrack::Io,
        eps: d.eps,
        cell_budget: SubdivisionConfig::default().cell_budget,
    }
}

/// Reads a Sherlock network file.
#[no_mangle]
pub unsafe extern "C" fn tr_network_load(path: *const c_char, out: *mut *mut TrNetwork) -> TrStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not UTF-8"))?;
        let net = sherlock::read(path).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TrNetwork {
            inputs: net.inputs(),
            layers: net.layers().to_vec(),
        }));
        Ok(())
    })
}

/// Starts an empty network with `inputs` inputs.
#[no_mangle]
pub unsafe extern "C" fn tr_network_new(inputs: usize, out: *mut *mut TrNetwork) -> TrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if inputs == 0 {
            return Err(invalid("a network needs at least one input"));
        }
        *out = Box::into_raw(Box::new(TrNetwork { inputs, layers: Vec::new() }));
        Ok(())
    })
}

/// Appends a layer: `weights` is row-major `outputs × width`, where `width`
/// is the size of the previous layer.
#[no_mangle]
pub unsafe extern "C" fn tr_network_push_layer(
    net: *mut TrNetwork,
    outputs: usize,
    weights: *const f64,
    bias: *const f64,
    relu: bool,
) -> TrStatus {
    guard(|| {
        let net = net.as_mut().ok_or_else(|| null("net"))?;
        if outputs == 0 {
            return Err(invalid("a layer needs at least one neuron"));
        }
        let width = net.layers.last().map_or(net.inputs, Layer::outputs);
        let w = slice_or_err(weights, outputs * width, "weights")?;
        let b = slice_or_err(bias, outputs, "bias")?;
        if w.iter().chain(b).any(|v| !v.is_finite()) {
            return Err(invalid("weights and biases must be finite"));
        }
        net.layers.push(Layer {
            weights: w.chunks(width).map(<[f64]>::to_vec).collect(),
            bias: b.to_vec(),
            relu,
        });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tr_network_inputs(net: *const TrNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.inputs)
}

#[no_mangle]
pub unsafe extern "C" fn tr_network_outputs(net: *const TrNetwork) -> usize {
    net.as_ref()
        .map_or(0, |n| n.layers.last().map_or(0, Layer::outputs))
}

#[no_mangle]
pub unsafe extern "C" fn tr_network_free(net: *mut TrNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

fn options_from(o: &TrOptions) -> Options {
    Options {
        mode: match o.mode {
            TrMode::Box => ChainMode::Box,
            TrMode::Zone => ChainMode::Zone,
            TrMode::External => ChainMode::External,
        },
        domain: match o.domain {
            TrDomain::Zone => Domain::Zone,
            TrDomain::Octagon => Domain::Octagon,
        },
        track: match o.track {
            TrTrack::Io => Track::Io,
            TrTrack::All => Track::All,
        },
        subdivision: None,
        eps: o.eps,
    }
}

/// Analyzes `net` over the box `[lo_j, hi_j]`. `subdiv` (nullable) gives
/// the number of pieces per input; `opts` (nullable) defaults to
/// [`tr_options_default`].
#[no_mangle]
pub unsafe extern "C" fn tr_analyze(
    net: *const TrNetwork,
    lo: *const f64,
    hi: *const f64,
    n_inputs: usize,
    opts: *const TrOptions,
    subdiv: *const usize,
    out: *mut *mut TrAnalysis,
) -> TrStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if n_inputs != net.inputs {
            return Err((
                TrStatus::DimensionMismatch,
                format!("network has {} inputs, box has {n_inputs}", net.inputs),
            ));
        }
        let lo = slice_or_err(lo, n_inputs, "lo")?;
        let hi = slice_or_err(hi, n_inputs, "hi")?;
        let input_box = lo
            .iter()
            .zip(hi)
            .map(|(&l, &h)| Interval::new(l, h))
            .collect::<Result<Vec<_>, _>>()
            .map(Hyperbox::new)
            .map_err(lib_err)?;
        let raw = opts.as_ref().copied().unwrap_or_else(|| tr_options_default());
        let mut options = options_from(&raw);
        if !subdiv.is_null() {
            options.subdivision = Some(InputSubdivision {
                counts: slice::from_raw_parts(subdiv, n_inputs).to_vec(),
                config: SubdivisionConfig {
                    cell_budget: raw.cell_budget,
                    ..SubdivisionConfig::default()
                },
            });
        }
        let network = Network::new(net.inputs, net.layers.clone()).map_err(lib_err)?;
        let result = network::analyze(&network, &input_box, &options).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TrAnalysis {
            result,
            network,
            options,
            input_box,
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tr_analysis_output_count(an: *const TrAnalysis) -> usize {
    an.as_ref().map_or(0, |a| a.result.output_nodes.len())
}

/// Copies the output intervals into `lo` and `hi`, each of length `len`
/// (the output count).
#[no_mangle]
pub unsafe extern "C" fn tr_analysis_output_bounds(an: *const TrAnalysis, lo: *mut f64, hi: *mut f64, len: usize) -> TrStatus {
    guard(|| {
        let an = an.as_ref().ok_or_else(|| null("analysis"))?;
        if lo.is_null() || hi.is_null() {
            return Err(null("output buffer"));
        }
        let bounds = an.result.output_bounds();
        if len != bounds.len() {
            return Err((
                TrStatus::DimensionMismatch,
                format!("{} outputs, buffers hold {len}", bounds.len()),
            ));
        }
        for (k, iv) in bounds.iter().enumerate() {
            *lo.add(k) = iv.lo;
            *hi.add(k) = iv.hi;
        }
        Ok(())
    })
}

/// Number of generators and their dimension in the final abstraction.
#[no_mangle]
pub unsafe extern "C" fn tr_analysis_generator_shape(an: *const TrAnalysis, count: *mut usize, dim: *mut usize) -> TrStatus {
    guard(|| {
        let an = an.as_ref().ok_or_else(|| null("analysis"))?;
        if count.is_null() || dim.is_null() {
            return Err(null("output"));
        }
        *count = an.result.internal.len();
        *dim = an.result.internal.dim();
        Ok(())
    })
}

/// Copies the generators row-major into `buf` of length `count × dim`.
#[no_mangle]
pub unsafe extern "C" fn tr_analysis_generators(an: *const TrAnalysis, buf: *mut f64, len: usize) -> TrStatus {
    guard(|| {
        let an = an.as_ref().ok_or_else(|| null("analysis"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let h = &an.result.internal;
        if len != h.len() * h.dim() {
            return Err((
                TrStatus::DimensionMismatch,
                format!("need {} values, buffer holds {len}", h.len() * h.dim()),
            ));
        }
        for (k, v) in h.generators().iter().flatten().enumerate() {
            *buf.add(k) = *v;
        }
        Ok(())
    })
}

/// Checks `in·x + out·y + constant ≥ 0` over the analysis. `restrict_lo`
/// and `restrict_hi` (both nullable) narrow the inputs; when given and the
/// analysis was subdivided, every grid cell is re-analyzed on its own.
#[no_mangle]
pub unsafe extern "C" fn tr_analysis_check(
    an: *const TrAnalysis,
    in_coeffs: *const f64,
    n_in: usize,
    out_coeffs: *const f64,
    n_out: usize,
    constant: f64,
    restrict_lo: *const f64,
    restrict_hi: *const f64,
    verified: *mut bool,
    witness: *mut f64,
) -> TrStatus {
    guard(|| {
        let an = an.as_ref().ok_or_else(|| null("analysis"))?;
        if verified.is_null() || witness.is_null() {
            return Err(null("output"));
        }
        let inputs = an.network.inputs();
        let mut a = LinearAssertion::new(
            "assertion",
            slice_or_err(in_coeffs, n_in, "in_coeffs")?.to_vec(),
            slice_or_err(out_coeffs, n_out, "out_coeffs")?.to_vec(),
            constant,
        )
        .map_err(lib_err)?;
        if !restrict_lo.is_null() && !restrict_hi.is_null() {
            let lo = slice::from_raw_parts(restrict_lo, inputs);
            let hi = slice::from_raw_parts(restrict_hi, inputs);
            let b = lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| Interval::new(l, h))
                .collect::<Result<Vec<_>, _>>()
                .map_err(lib_err)?;
            a = a.restricted(Hyperbox::new(b));
        }
        let mut v = spec_check::check(&a, &an.result, an.options.eps).map_err(lib_err)?;
        if let (Status::Unknown, Some(s)) = (v.status, &an.options.subdivision) {
            let grid = troprelu::subdivision::SubdivisionGrid::uniform(&an.input_box, &s.counts).map_err(lib_err)?;
            v = spec_check::check_with_subdivision(&a, &an.network, &grid, &an.options, s.config.cell_budget)
                .map_err(lib_err)?;
        }
        *verified = v.status == Status::Verified;
        *witness = v.witness;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tr_analysis_free(an: *mut TrAnalysis) {
    if !an.is_null() {
        drop(Box::from_raw(an));
    }
}

