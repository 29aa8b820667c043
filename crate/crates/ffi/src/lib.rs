//! C ABI over `polsar_pretrain`.
//!
//! Objects cross the boundary as opaque handles created by a `polsar_*`
//! constructor and released with the matching `*_free`. Every fallible call
//! returns a [`PolsarStatus`]; on failure a message for the calling thread is
//! available from [`polsar_last_error_message`]. Panics are caught and
//! reported as [`PolsarStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use polsar_pretrain::cli::CliError;
use polsar_pretrain::io::{self, RunConfig};
use polsar_pretrain::labels::{generate_labels, BinaryLabelStack};
use polsar_pretrain::polsar::{self as core, boxcar_coherency, span_raster, RasterMetadata, ScatteringMatrix};
use polsar_pretrain::pretrain::{self, ModelParams, TrainingScene};
use polsar_pretrain::scene::{synthesize_scene, SceneSpec};
use polsar_pretrain::yamaguchi::{decompose_raster, ComponentStack};

/// Result codes. Values 10 and up match the exit codes of the `polsar` CLI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolsarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferSize = 3,
    Io = 10,
    BadMagic = 11,
    UnsupportedVersion = 12,
    Truncated = 13,
    ChannelCount = 14,
    Malformed = 15,
    Json = 16,
    Config = 17,
    Pretrain = 20,
    Diverged = 21,
    Polsar = 30,
    Scene = 31,
    Query = 32,
    Panic = 99,
}

impl PolsarStatus {
    fn from_code(code: i32) -> Self {
        match code {
            10 => Self::Io,
            11 => Self::BadMagic,
            12 => Self::UnsupportedVersion,
            13 => Self::Truncated,
            14 => Self::ChannelCount,
            15 => Self::Malformed,
            16 => Self::Json,
            17 => Self::Config,
            20 => Self::Pretrain,
            21 => Self::Diverged,
            30 => Self::Polsar,
            31 => Self::Scene,
            32 => Self::Query,
            _ => Self::InvalidArgument,
        }
    }
}

/// A PolSAR raster (four complex channels per pixel).
pub struct PolsarRaster(core::PolsarRaster);

/// Yamaguchi component powers: surface, double bounce, volume, helix.
pub struct PolsarComponents(ComponentStack);

/// Binary component masks in the same order as [`PolsarComponents`].
pub struct PolsarLabels(BinaryLabelStack);

/// Trained or loaded model parameters.
pub struct PolsarModel(ModelParams);

struct Failure {
    status: PolsarStatus,
    message: String,
}

impl Failure {
    fn new(status: PolsarStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl<E: Into<CliError>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e: CliError = e.into();
        Self::new(PolsarStatus::from_code(e.code()), e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PolsarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PolsarStatus::Ok,
        Ok(Err(failure)) => {
            set_error(&failure.message);
            failure.status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            PolsarStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass handles obtained from this library or valid pointers.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(PolsarStatus::NullPointer, format!("{what} is null")))
}

fn c_str(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::new(PolsarStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null, NUL-terminated by contract.
    let s = unsafe { CStr::from_ptr(p) };
    s.to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::new(PolsarStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(PolsarStatus::NullPointer, "output handle pointer is null"));
    }
    // SAFETY: `out` is non-null and points to writable storage by contract.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn fill<T: Copy>(out: *mut T, len: usize, values: &[T]) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(PolsarStatus::NullPointer, "output buffer is null"));
    }
    if len != values.len() {
        return Err(Failure::new(
            PolsarStatus::BufferSize,
            format!("buffer holds {len} values, {} required", values.len()),
        ));
    }
    // SAFETY: `out` has room for `len` values by contract.
    unsafe { std::slice::from_raw_parts_mut(out, len) }.copy_from_slice(values);
    Ok(())
}

fn free<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` came from `Box::into_raw` in this library and is freed once.
        drop(unsafe { Box::from_raw(p) });
    }
}

fn component_index(index: usize) -> Result<usize, Failure> {
    if index < 4 {
        Ok(index)
    } else {
        Err(Failure::new(PolsarStatus::InvalidArgument, format!("component index {index} >= 4")))
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn polsar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the calling thread's last error message, excluding
/// the terminating NUL; 0 if there is none.
#[no_mangle]
pub extern "C" fn polsar_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message into `buf` (truncated to `len - 1` bytes,
/// always NUL-terminated when `len > 0`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn polsar_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

#[no_mangle]
pub extern "C" fn polsar_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Reads a CPXR file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polsar_raster_read(path: *const c_char, out: *mut *mut PolsarRaster) -> PolsarStatus {
    guard(|| {
        let path = PathBuf::from(c_str(path, "path")?);
        put(out, PolsarRaster(io::read_cpxr(&path)?))
    })
}

/// Writes a CPXR file.
///
/// # Safety
/// `raster` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn polsar_raster_write(raster: *const PolsarRaster, path: *const c_char) -> PolsarStatus {
    guard(|| {
        let r = non_null(raster, "raster")?;
        let path = PathBuf::from(c_str(path, "path")?);
        Ok(io::write_cpxr(&r.0, &path)?)
    })
}

/// Synthesizes the four-quadrant demo scene.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polsar_raster_synthesize_demo(
    height: usize,
    width: usize,
    seed: u64,
    out: *mut *mut PolsarRaster,
) -> PolsarStatus {
    guard(|| put(out, PolsarRaster(synthesize_scene(&SceneSpec::demo(height, width), seed)?)))
}

/// Builds a raster from `8 * height * width` samples laid out as eight
/// planes: re/im of HH, HV, VH, VV.
///
/// # Safety
/// `planes` must point to `8 * height * width` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn polsar_raster_from_planes(
    height: usize,
    width: usize,
    planes: *const f64,
    out: *mut *mut PolsarRaster,
) -> PolsarStatus {
    guard(|| {
        non_null(planes, "planes")?;
        let n = height
            .checked_mul(width)
            .ok_or_else(|| Failure::new(PolsarStatus::InvalidArgument, "raster size overflows"))?;
        let data = std::slice::from_raw_parts(planes, 8 * n);
        let pixels = (0..n)
            .map(|i| {
                let c = |k: usize| core::ComplexSample::new(data[2 * k * n + i], data[(2 * k + 1) * n + i]);
                ScatteringMatrix::from_channels([c(0), c(1), c(2), c(3)])
            })
            .collect();
        put(out, PolsarRaster(core::PolsarRaster::new(height, width, pixels, RasterMetadata::default())?))
    })
}

/// # Safety
/// `raster` must be a live handle; `height` and `width` writable.
#[no_mangle]
pub unsafe extern "C" fn polsar_raster_shape(
    raster: *const PolsarRaster,
    height: *mut usize,
    width: *mut usize,
) -> PolsarStatus {
    guard(|| {
        let r = non_null(raster, "raster")?;
        fill(height, 1, &[r.0.height()])?;
        fill(width, 1, &[r.0.width()])
    })
}

/// Total power per pixel into `out` (`len == height * width`, row-major).
///
/// # Safety
/// `raster` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn polsar_raster_span(raster: *const PolsarRaster, out: *mut f64, len: usize) -> PolsarStatus {
    guard(|| {
        let r = non_null(raster, "raster")?;
        fill(out, len, span_raster(&r.0).as_slice())
    })
}

/// # Safety
/// `raster` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polsar_raster_free(raster: *mut PolsarRaster) {
    free(raster);
}

/// Boxcar coherency (odd `window`) then Yamaguchi decomposition.
///
/// # Safety
/// `raster` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn polsar_decompose(
    raster: *const PolsarRaster,
    window: usize,
    out: *mut *mut PolsarComponents,
) -> PolsarStatus {
    guard(|| {
        let r = non_null(raster, "raster")?;
        let t = boxcar_coherency(&r.0, window)?;
        put(out, PolsarComponents(decompose_raster(&t).0))
    })
}

/// Copies component `index` (0 surface, 1 double bounce, 2 volume, 3 helix).
///
/// # Safety
/// `components` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn polsar_components_plane(
    components: *const PolsarComponents,
    index: usize,
    out: *mut f64,
    len: usize,
) -> PolsarStatus {
    guard(|| {
        let c = non_null(components, "components")?;
        fill(out, len, c.0.planes[component_index(index)?].as_slice())
    })
}

/// # Safety
/// `components` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polsar_components_free(components: *mut PolsarComponents) {
    free(components);
}

/// Rayleigh median binarization of each component.
///
/// # Safety
/// `components` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn polsar_labels_generate(
    components: *const PolsarComponents,
    out: *mut *mut PolsarLabels,
) -> PolsarStatus {
    guard(|| {
        let c = non_null(components, "components")?;
        put(out, PolsarLabels(generate_labels(&c.0)))
    })
}

/// Copies mask `index` as 0/1 bytes.
///
/// # Safety
/// `labels` must be a live handle; `out` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn polsar_labels_mask(
    labels: *const PolsarLabels,
    index: usize,
    out: *mut u8,
    len: usize,
) -> PolsarStatus {
    guard(|| {
        let l = non_null(labels, "labels")?;
        fill(out, len, l.0.masks[component_index(index)?].as_slice())
    })
}

/// # Safety
/// `labels` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polsar_labels_free(labels: *mut PolsarLabels) {
    free(labels);
}

fn scene(
    model_patch: usize,
    raster: *const PolsarRaster,
    labels: *const PolsarLabels,
) -> Result<TrainingScene, Failure> {
    let r = non_null(raster, "raster")?;
    let l = non_null(labels, "labels")?;
    Ok(TrainingScene::new(&r.0, &l.0, model_patch)?)
}

/// Trains on one raster and its labels. `config_toml` holds run config text
/// (null for defaults). `final_loss` may be null.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn polsar_model_train(
    raster: *const PolsarRaster,
    labels: *const PolsarLabels,
    config_toml: *const c_char,
    out: *mut *mut PolsarModel,
    final_loss: *mut f64,
) -> PolsarStatus {
    guard(|| {
        let cfg = if config_toml.is_null() {
            RunConfig::default()
        } else {
            RunConfig::parse(&c_str(config_toml, "config_toml")?)?
        };
        let s = scene(cfg.patch, raster, labels)?;
        let outcome = pretrain::train(std::slice::from_ref(&s), cfg.encoder(), cfg.decoder(), &cfg.train())?;
        if !final_loss.is_null() {
            *final_loss = outcome.trace.last().map_or(f64::NAN, |r| r.total);
        }
        put(out, PolsarModel(outcome.params))
    })
}

/// Loads a checkpoint from its JSON manifest.
///
/// # Safety
/// `manifest_path` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn polsar_model_load(manifest_path: *const c_char, out: *mut *mut PolsarModel) -> PolsarStatus {
    guard(|| {
        let p = PathBuf::from(c_str(manifest_path, "manifest_path")?);
        put(out, PolsarModel(io::load_checkpoint(&p)?))
    })
}

/// Writes `<stem>.ppck` and `<stem>.json` into `dir`.
///
/// # Safety
/// `model` must be a live handle; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn polsar_model_save(
    model: *const PolsarModel,
    dir: *const c_char,
    stem: *const c_char,
) -> PolsarStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let dir = PathBuf::from(c_str(dir, "dir")?);
        let stem = c_str(stem, "stem")?;
        if stem.is_empty() || stem.contains(['/', '\\']) {
            return Err(Failure::new(PolsarStatus::InvalidArgument, "stem must be a plain file name"));
        }
        io::save_checkpoint(&m.0, &dir, &stem)?;
        Ok(())
    })
}

/// Per-component overall accuracy (percent) on a raster and its labels;
/// `oa` receives four values.
///
/// # Safety
/// Handles must be live; `oa` must hold 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn polsar_model_evaluate(
    model: *const PolsarModel,
    raster: *const PolsarRaster,
    labels: *const PolsarLabels,
    oa: *mut f64,
) -> PolsarStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let s = scene(m.0.encoder.patch, raster, labels)?;
        let metrics = pretrain::evaluate(&m.0, std::slice::from_ref(&s))?;
        let values: Vec<f64> = metrics.components.iter().map(|c| c.oa).collect();
        fill(oa, 4, &values)
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polsar_model_free(model: *mut PolsarModel) {
    free(model);
}
