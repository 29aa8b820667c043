//! Compiles and runs a C program against the generated header and the static
//! library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "polsar_ffi.h"

int main(void) {
    PolsarRaster *raster = NULL;
    if (polsar_raster_synthesize_demo(8, 8, 1, &raster) != POLSAR_STATUS_OK) return 1;
    size_t h = 0, w = 0;
    if (polsar_raster_shape(raster, &h, &w) != POLSAR_STATUS_OK || h != 8 || w != 8) return 2;

    PolsarComponents *comps = NULL;
    if (polsar_decompose(raster, 3, &comps) != POLSAR_STATUS_OK) return 3;
    double plane[64];
    if (polsar_components_plane(comps, 0, plane, 64) != POLSAR_STATUS_OK) return 4;

    PolsarRaster *missing = NULL;
    if (polsar_raster_read("/no/such/file", &missing) != POLSAR_STATUS_IO) return 5;
    char msg[256];
    size_t n = polsar_last_error_message(msg, sizeof msg);
    if (n == 0 || strstr(msg, "/no/such/file") == NULL) return 6;

    polsar_components_free(comps);
    polsar_raster_free(raster);
    printf("ok %s\n", polsar_version());
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    std::env::var_os("CARGO_TARGET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target"))
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/polsar_ffi.h")).unwrap();
    for name in [
        "polsar_last_error_message",
        "polsar_raster_read",
        "polsar_decompose",
        "polsar_labels_generate",
        "polsar_model_train",
        "polsar_model_free",
        "typedef struct PolsarRaster PolsarRaster",
        "POLSAR_STATUS_BAD_MAGIC = 11",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn c_program_links_and_runs() {
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    let lib_dir = target_dir().join(profile);
    let archive = lib_dir.join("libpolsar_ffi.a");
    assert!(archive.exists(), "static library missing at {}", archive.display());

    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("main.c");
    let exe = work.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success(), "C build failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok 0.1.0"));
}
