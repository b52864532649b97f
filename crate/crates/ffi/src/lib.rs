//! C ABI over the freedimer engine.
//!
//! Handles are opaque heap pointers created by `fd_*_new` style constructors and released with
//! the matching `*_free`. Every fallible call returns an [`FdStatus`]; the message of the last
//! failure on the calling thread is available through [`fd_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use freedimer::kasteleyn::{inverse_kasteleyn, partition_function, InverseKasteleyn};
use freedimer::lattice::{augment_with_mode, build_rectangle_domain, AugmentedDomain, CornerMode, Domain, DomainSpec, LatticePoint};
use freedimer::mc::{ExactSampler, RngStream};
use freedimer::walks::effective_jump_weights;
use freedimer::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Numerical = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Opaque domain handle.
pub struct FdDomain {
    inner: Domain,
}

/// Opaque augmented-graph handle; the inverse Kasteleyn matrix is computed on first use.
pub struct FdGraph {
    inner: AugmentedDomain,
    inverse: OnceLock<Result<InverseKasteleyn, String>>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> FdStatus {
    if err.exit_code() == 2 {
        FdStatus::Validation
    } else {
        FdStatus::Numerical
    }
}

fn guard<F: FnOnce() -> Result<(), FdStatus>>(f: F) -> FdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FdStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside freedimer".into());
            FdStatus::Panic
        }
    }
}

fn fail(err: Error) -> FdStatus {
    let s = status_of(&err);
    set_error(err.to_string());
    s
}

fn null(what: &str) -> FdStatus {
    set_error(format!("{what} is null"));
    FdStatus::NullPointer
}

/// Copies the last error message of this thread into `buf` (NUL-terminated, truncated to
/// `len`). Returns the full message length excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fd_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Rectangle domain of odd sides with the top-row notch.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn fd_domain_rectangle(width: usize, height: usize, out: *mut *mut FdDomain) -> FdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let d = build_rectangle_domain(width, height).map_err(fail)?;
        *out = Box::into_raw(Box::new(FdDomain { inner: d }));
        Ok(())
    })
}

/// Domain from `n` vertices with coordinates `xs[i], ys[i]`.
///
/// # Safety
/// `xs` and `ys` must point to `n` readable values; `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn fd_domain_from_points(
    xs: *const i64,
    ys: *const i64,
    n: usize,
    out: *mut *mut FdDomain,
) -> FdStatus {
    guard(|| {
        if xs.is_null() || ys.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let xs = std::slice::from_raw_parts(xs, n);
        let ys = std::slice::from_raw_parts(ys, n);
        let pts: Vec<LatticePoint> = xs.iter().zip(ys).map(|(&x, &y)| LatticePoint::new(x, y)).collect();
        let d = Domain::from_vertices(&pts).map_err(fail)?;
        *out = Box::into_raw(Box::new(FdDomain { inner: d }));
        Ok(())
    })
}

/// Domain from JSON text `{"type":"rectangle",...}` / `{"type":"explicit",...}` or `rect:WxH`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` a handle slot.
#[no_mangle]
pub unsafe extern "C" fn fd_domain_parse(text: *const c_char, out: *mut *mut FdDomain) -> FdStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let s = CStr::from_ptr(text).to_str().map_err(|_| {
            set_error("domain text is not UTF-8".into());
            FdStatus::Validation
        })?;
        let d = DomainSpec::parse(s).and_then(|spec| spec.build()).map_err(fail)?;
        *out = Box::into_raw(Box::new(FdDomain { inner: d }));
        Ok(())
    })
}

/// # Safety
/// `d` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fd_domain_free(d: *mut FdDomain) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of vertices, 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_domain_vertex_count(d: *const FdDomain) -> usize {
    d.as_ref().map_or(0, |d| d.inner.len())
}

/// Augmented graph with `nside` side triangle pairs. `finite_corners != 0` gives every leg
/// weight `z`; otherwise the two corner legs carry the corner weight.
///
/// # Safety
/// `d` must be a live domain handle; `out` a handle slot.
#[no_mangle]
pub unsafe extern "C" fn fd_graph_new(
    d: *const FdDomain,
    z: f64,
    nside: usize,
    finite_corners: i32,
    out: *mut *mut FdGraph,
) -> FdStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("domain"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = if finite_corners != 0 { CornerMode::FiniteN } else { CornerMode::ExplicitZPrime };
        let g = augment_with_mode(&d.inner, z, nside, mode).map_err(fail)?;
        *out = Box::into_raw(Box::new(FdGraph { inner: g, inverse: OnceLock::new() }));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn fd_graph_free(g: *mut FdGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn fd_graph_vertex_count(g: *const FdGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.len())
}

/// Weighted count of dimer covers, `|Pf K|`.
///
/// # Safety
/// `g` must be a live graph handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fd_graph_partition_function(g: *const FdGraph, out: *mut f64) -> FdStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = partition_function(&g.inner).map_err(fail)?.0;
        Ok(())
    })
}

/// Probability that the edge between `(ux,uy)` and `(vx,vy)` is in the cover. Apex vertices
/// sit on row -1.
///
/// # Safety
/// `g` must be a live graph handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fd_graph_edge_probability(
    g: *const FdGraph,
    ux: i64,
    uy: i64,
    vx: i64,
    vy: i64,
    out: *mut f64,
) -> FdStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let lookup = |x, y| {
            g.inner.index_of(LatticePoint::new(x, y)).ok_or_else(|| {
                set_error(format!("({x},{y}) is not a vertex"));
                FdStatus::Validation
            })
        };
        let (u, v) = (lookup(ux, uy)?, lookup(vx, vy)?);
        if g.inner.edge_between(u, v).is_none() {
            set_error("the points are not joined by an edge".into());
            return Err(FdStatus::Validation);
        }
        let inv = g.inverse.get_or_init(|| inverse_kasteleyn(&g.inner).map_err(|e| e.to_string()));
        match inv {
            Ok(inv) => {
                *out = inv.edge_probability(u, v);
                Ok(())
            }
            Err(msg) => {
                set_error(msg.clone());
                Err(FdStatus::Numerical)
            }
        }
    })
}

/// Writes `q_0..=q_kmax` into `out`, which must hold `kmax + 1` values.
///
/// # Safety
/// `out` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn fd_jump_weights(z: f64, kmax: usize, out: *mut f64, len: usize) -> FdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if len < kmax + 1 {
            set_error(format!("buffer holds {len} values, {} needed", kmax + 1));
            return Err(FdStatus::BufferTooSmall);
        }
        let q = effective_jump_weights(z, kmax).map_err(fail)?;
        std::slice::from_raw_parts_mut(out, len)[..q.len()].copy_from_slice(&q);
        Ok(())
    })
}

/// Draws one exact sample and writes the x coordinates of its monomers (sorted) into `xs`.
/// `count` receives the number of monomers even when the buffer is too small.
///
/// # Safety
/// `g` must be a live graph handle, `xs` must point to `cap` writable values (or be null
/// with `cap == 0`) and `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_sample_monomers(
    g: *const FdGraph,
    seed: u64,
    stream: u64,
    xs: *mut i64,
    cap: usize,
    count: *mut usize,
) -> FdStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        if count.is_null() || (xs.is_null() && cap > 0) {
            return Err(null("output"));
        }
        let sampler = ExactSampler::new(&g.inner).map_err(fail)?;
        let mut rng = RngStream::new(seed, stream).rng();
        let cover = sampler.sample_md(&mut rng).map_err(fail)?;
        *count = cover.monomers.len();
        if cover.monomers.len() > cap {
            set_error(format!("{} monomers, buffer holds {cap}", cover.monomers.len()));
            return Err(FdStatus::BufferTooSmall);
        }
        for (i, m) in cover.monomers.iter().enumerate() {
            *xs.add(i) = m.x;
        }
        Ok(())
    })
}
