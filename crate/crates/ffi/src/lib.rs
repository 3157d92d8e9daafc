//! C ABI over the careval metrics.
//!
//! Every fallible function returns a [`CarevalStatus`]; on failure the
//! message is available from [`careval_last_error_message`] on the same
//! thread until the next failing call. Results are written through caller
//! pointers only on success. Embedding matrices are opaque handles that must
//! be released with [`careval_embeddings_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use careval::adapt::{info_nce_loss, LossBatch};
use careval::capst::f1;
use careval::embed_store::{default_ids_path, read_embeddings, write_embeddings, EmbeddingMatrix};
use careval::retrieval::{eval_retrieval, rebias, unified_score, BiasOrientation, RecallTable, Split};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarevalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Metric = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarevalBiasOrientation {
    /// `100 * |mean_spatial / mean_temporal - 1|`; the default.
    TableCompatible = 0,
    /// `100 * |1 - mean_temporal / mean_spatial|`.
    Literal = 1,
}

/// Opaque N×D embedding matrix with row ids.
pub struct CarevalEmbeddings {
    inner: EmbeddingMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(CarevalStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(CarevalStatus::NullPointer, format!("{what} is NULL"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure(CarevalStatus::InvalidArgument, message.into())
    }
}

fn embed_failure(e: careval::embed_store::EmbedError) -> Failure {
    use careval::embed_store::EmbedError;
    let status = match e {
        EmbedError::Io { .. } => CarevalStatus::Io,
        EmbedError::BadMagic | EmbedError::PayloadSize { .. } | EmbedError::IdCount { .. } => CarevalStatus::Format,
        _ => CarevalStatus::InvalidArgument,
    };
    Failure(status, e.to_string())
}

fn metric_failure(e: impl std::fmt::Display) -> Failure {
    Failure(CarevalStatus::Metric, e.to_string())
}

/// Run `body`, turning errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CarevalStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CarevalStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {message}"));
            CarevalStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn handle_arg<'a>(p: *const CarevalEmbeddings, what: &str) -> Result<&'a EmbeddingMatrix, Failure> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| Failure::null(what))
}

/// NUL-terminated library version; static storage.
#[no_mangle]
pub extern "C" fn careval_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn careval_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build a matrix from `rows * dim` row-major floats. `ids` holds `rows`
/// NUL-terminated strings, or is NULL to use the row indices "0", "1", ...
///
/// # Safety
/// `data` must point to `rows * dim` floats, `ids` (when not NULL) to
/// `rows` valid C strings, and `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn careval_embeddings_from_buffer(
    data: *const f32,
    rows: usize,
    dim: usize,
    ids: *const *const c_char,
    out: *mut *mut CarevalEmbeddings,
) -> CarevalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let len = rows
            .checked_mul(dim)
            .ok_or_else(|| Failure::invalid("rows * dim overflows"))?;
        let values = slice_arg(data, len, "data")?;
        let id_list: Vec<String> = if ids.is_null() {
            (0..rows).map(|i| i.to_string()).collect()
        } else {
            slice_arg(ids, rows, "ids")?
                .iter()
                .enumerate()
                .map(|(i, &p)| str_arg(p, &format!("ids[{i}]")).map(str::to_owned))
                .collect::<Result<_, _>>()?
        };
        let data: Vec<f64> = values.iter().map(|&x| f64::from(x)).collect();
        let inner = EmbeddingMatrix::new(id_list, data, dim).map_err(embed_failure)?;
        *out = Box::into_raw(Box::new(CarevalEmbeddings { inner }));
        Ok(())
    })
}

/// Read a CAREEMB1 file. `ids_path` may be NULL for `<data_path>.ids`.
///
/// # Safety
/// Path arguments must be NULL or valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn careval_embeddings_read(
    data_path: *const c_char,
    ids_path: *const c_char,
    out: *mut *mut CarevalEmbeddings,
) -> CarevalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let data = PathBuf::from(str_arg(data_path, "data_path")?);
        let ids = if ids_path.is_null() {
            default_ids_path(&data)
        } else {
            PathBuf::from(str_arg(ids_path, "ids_path")?)
        };
        let inner = read_embeddings(&data, &ids).map_err(embed_failure)?;
        *out = Box::into_raw(Box::new(CarevalEmbeddings { inner }));
        Ok(())
    })
}

/// Write a CAREEMB1 file. `ids_path` may be NULL for `<data_path>.ids`.
///
/// # Safety
/// `handle` must come from this library; path arguments must be NULL or
/// valid C strings.
#[no_mangle]
pub unsafe extern "C" fn careval_embeddings_write(
    handle: *const CarevalEmbeddings,
    data_path: *const c_char,
    ids_path: *const c_char,
) -> CarevalStatus {
    guard(|| {
        let m = handle_arg(handle, "handle")?;
        let data = PathBuf::from(str_arg(data_path, "data_path")?);
        let ids = if ids_path.is_null() {
            default_ids_path(&data)
        } else {
            PathBuf::from(str_arg(ids_path, "ids_path")?)
        };
        write_embeddings(m, &data, &ids).map_err(embed_failure)
    })
}

/// Row count, or 0 for a NULL handle.
///
/// # Safety
/// `handle` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn careval_embeddings_rows(handle: *const CarevalEmbeddings) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.rows())
}

/// Column count, or 0 for a NULL handle.
///
/// # Safety
/// `handle` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn careval_embeddings_dim(handle: *const CarevalEmbeddings) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.dim())
}

/// Release a handle. NULL is ignored.
///
/// # Safety
/// `handle` must be NULL or come from this library, and must not be used
/// after this call.
#[no_mangle]
pub unsafe extern "C" fn careval_embeddings_free(handle: *mut CarevalEmbeddings) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Recall@K in percent for both directions. Rows pair by id. `ks` must be
/// positive and strictly ascending; `t2v_out` and `v2t_out` receive `n_ks`
/// values each, in the order of `ks`.
///
/// # Safety
/// Handles must come from this library; `ks`, `t2v_out` and `v2t_out` must
/// each hold `n_ks` elements.
#[no_mangle]
pub unsafe extern "C" fn careval_eval_retrieval(
    text: *const CarevalEmbeddings,
    video: *const CarevalEmbeddings,
    ks: *const usize,
    n_ks: usize,
    t2v_out: *mut f64,
    v2t_out: *mut f64,
) -> CarevalStatus {
    guard(|| {
        let t = handle_arg(text, "text")?;
        let v = handle_arg(video, "video")?;
        let ks = slice_arg(ks, n_ks, "ks")?;
        if t2v_out.is_null() || v2t_out.is_null() {
            return Err(Failure::null("output buffer"));
        }
        let table = eval_retrieval(Split::General, t, v, ks).map_err(metric_failure)?;
        for (i, k) in ks.iter().enumerate() {
            *t2v_out.add(i) = table.t2v[k];
            *v2t_out.add(i) = table.v2t[k];
        }
        Ok(())
    })
}

/// Bias between two recall tables, each laid out as
/// `[t2v R@1, R@5, R@10, v2t R@1, R@5, R@10]` in percent.
///
/// # Safety
/// `spatial` and `temporal` must each hold 6 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn careval_rebias(
    spatial: *const f64,
    temporal: *const f64,
    orientation: CarevalBiasOrientation,
    out: *mut f64,
) -> CarevalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s = RecallTable::from_r1_r5_r10(Split::Spatial, slice_arg(spatial, 6, "spatial")?)
            .map_err(metric_failure)?;
        let t = RecallTable::from_r1_r5_r10(Split::Temporal, slice_arg(temporal, 6, "temporal")?)
            .map_err(metric_failure)?;
        let o = match orientation {
            CarevalBiasOrientation::TableCompatible => BiasOrientation::Table3Compatible,
            CarevalBiasOrientation::Literal => BiasOrientation::Eq1Literal,
        };
        *out = rebias(&s, &t, o).map_err(metric_failure)?.bias_percent;
        Ok(())
    })
}

/// Harmonic mean of precision and recall; 0 when both are 0.
#[no_mangle]
pub extern "C" fn careval_f1(precision: f64, recall: f64) -> f64 {
    f1(precision, recall)
}

/// Mean of average R@1 and average F1.
#[no_mangle]
pub extern "C" fn careval_unified_score(avg_r1: f64, avg_f1: f64) -> f64 {
    unified_score(avg_r1, avg_f1)
}

/// In-batch contrastive loss over `n` (anchor, positive, negative) rows of
/// width `dim`, each array row-major `n * dim`.
///
/// # Safety
/// Each input must hold `n * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn careval_info_nce_loss(
    anchors: *const f64,
    positives: *const f64,
    negatives: *const f64,
    n: usize,
    dim: usize,
    tau: f64,
    out: *mut f64,
) -> CarevalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if n == 0 || dim == 0 {
            return Err(Failure::invalid("n and dim must be positive"));
        }
        let len = n.checked_mul(dim).ok_or_else(|| Failure::invalid("n * dim overflows"))?;
        let rows = |p: *const f64, what: &str| -> Result<Vec<Vec<f64>>, Failure> {
            Ok(slice_arg(p, len, what)?.chunks_exact(dim).map(<[f64]>::to_vec).collect())
        };
        let batch = LossBatch::from_rows(&rows(anchors, "anchors")?, &rows(positives, "positives")?, &rows(negatives, "negatives")?, tau)
            .map_err(|e| Failure::invalid(e.to_string()))?;
        *out = info_nce_loss(&batch).map_err(metric_failure)?;
        Ok(())
    })
}
