use std::ffi::{c_char, CStr, CString};
use std::ptr;

use polsar_ffi::*;

fn last_error() -> String {
    let n = polsar_last_error_length();
    let mut buf = vec![0 as c_char; n + 1];
    let full = unsafe { polsar_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(full, n);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn pipeline_through_the_c_abi() {
    unsafe {
        let mut raster = ptr::null_mut();
        assert_eq!(polsar_raster_synthesize_demo(16, 16, 3, &mut raster), PolsarStatus::Ok);
        let (mut h, mut w) = (0usize, 0usize);
        assert_eq!(polsar_raster_shape(raster, &mut h, &mut w), PolsarStatus::Ok);
        assert_eq!((h, w), (16, 16));

        let mut span = vec![0.0; h * w];
        assert_eq!(polsar_raster_span(raster, span.as_mut_ptr(), span.len()), PolsarStatus::Ok);
        assert!(span.iter().all(|v| *v >= 0.0));

        let mut comps = ptr::null_mut();
        assert_eq!(polsar_decompose(raster, 5, &mut comps), PolsarStatus::Ok);
        let mut total = vec![0.0; h * w];
        for k in 0..4 {
            let mut plane = vec![0.0; h * w];
            assert_eq!(polsar_components_plane(comps, k, plane.as_mut_ptr(), plane.len()), PolsarStatus::Ok);
            for (t, p) in total.iter_mut().zip(&plane) {
                *t += p;
            }
        }
        assert!(total.iter().any(|v| *v > 0.0));

        let mut labels = ptr::null_mut();
        assert_eq!(polsar_labels_generate(comps, &mut labels), PolsarStatus::Ok);
        let mut mask = vec![9u8; h * w];
        assert_eq!(polsar_labels_mask(labels, 2, mask.as_mut_ptr(), mask.len()), PolsarStatus::Ok);
        assert!(mask.iter().all(|v| *v <= 1));

        let cfg = CString::new("d = 16\niters = 30\nlr = 0.04\n").unwrap();
        let mut model = ptr::null_mut();
        let mut loss = f64::NAN;
        assert_eq!(
            polsar_model_train(raster, labels, cfg.as_ptr(), &mut model, &mut loss),
            PolsarStatus::Ok,
            "{}",
            last_error()
        );
        assert!(loss.is_finite());

        let mut oa = [0.0; 4];
        assert_eq!(polsar_model_evaluate(model, raster, labels, oa.as_mut_ptr()), PolsarStatus::Ok);
        assert!(oa.iter().all(|v| (0.0..=100.0).contains(v)));

        let dir = tempfile::tempdir().unwrap();
        let dir_c = CString::new(dir.path().to_str().unwrap()).unwrap();
        let stem = CString::new("m").unwrap();
        assert_eq!(polsar_model_save(model, dir_c.as_ptr(), stem.as_ptr()), PolsarStatus::Ok);
        let manifest = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
        let mut loaded = ptr::null_mut();
        assert_eq!(polsar_model_load(manifest.as_ptr(), &mut loaded), PolsarStatus::Ok);
        let mut oa2 = [0.0; 4];
        assert_eq!(polsar_model_evaluate(loaded, raster, labels, oa2.as_mut_ptr()), PolsarStatus::Ok);
        assert_eq!(oa, oa2);

        let path = CString::new(dir.path().join("r.cpxr").to_str().unwrap()).unwrap();
        assert_eq!(polsar_raster_write(raster, path.as_ptr()), PolsarStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(polsar_raster_read(path.as_ptr(), &mut back), PolsarStatus::Ok);
        let mut span2 = vec![0.0; h * w];
        assert_eq!(polsar_raster_span(back, span2.as_mut_ptr(), span2.len()), PolsarStatus::Ok);
        for (a, b) in span.iter().zip(&span2) {
            assert!((a - b).abs() <= 1e-6 * a.max(1e-12));
        }

        polsar_model_free(loaded);
        polsar_model_free(model);
        polsar_labels_free(labels);
        polsar_components_free(comps);
        polsar_raster_free(back);
        polsar_raster_free(raster);
    }
}

#[test]
fn planes_constructor_matches_layout() {
    // One pixel: HH = 1+2i, HV = VH = 0, VV = 3.
    let planes = [1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 3.0, 0.0];
    unsafe {
        let mut raster = ptr::null_mut();
        assert_eq!(polsar_raster_from_planes(1, 1, planes.as_ptr(), &mut raster), PolsarStatus::Ok);
        let mut span = [0.0];
        assert_eq!(polsar_raster_span(raster, span.as_mut_ptr(), 1), PolsarStatus::Ok);
        assert_eq!(span[0], 1.0 + 4.0 + 9.0);
        polsar_raster_free(raster);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        polsar_clear_error();
        assert_eq!(polsar_last_error_length(), 0);

        let mut raster = ptr::null_mut();
        let missing = CString::new("/no/such/file.cpxr").unwrap();
        assert_eq!(polsar_raster_read(missing.as_ptr(), &mut raster), PolsarStatus::Io);
        assert!(raster.is_null());
        assert!(last_error().contains("/no/such/file.cpxr"));

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.cpxr");
        std::fs::write(&junk, b"JUNK\x01\x00").unwrap();
        let junk_c = CString::new(junk.to_str().unwrap()).unwrap();
        assert_eq!(polsar_raster_read(junk_c.as_ptr(), &mut raster), PolsarStatus::BadMagic);

        assert_eq!(polsar_raster_read(ptr::null(), &mut raster), PolsarStatus::NullPointer);
        assert_eq!(polsar_raster_shape(ptr::null(), ptr::null_mut(), ptr::null_mut()), PolsarStatus::NullPointer);

        assert_eq!(polsar_raster_synthesize_demo(4, 4, 1, &mut raster), PolsarStatus::Ok);
        let mut small = [0.0; 3];
        assert_eq!(polsar_raster_span(raster, small.as_mut_ptr(), 3), PolsarStatus::BufferSize);
        let mut comps = ptr::null_mut();
        assert_eq!(polsar_decompose(raster, 4, &mut comps), PolsarStatus::Polsar);
        assert_eq!(polsar_decompose(raster, 3, &mut comps), PolsarStatus::Ok);
        let mut plane = [0.0; 16];
        assert_eq!(polsar_components_plane(comps, 4, plane.as_mut_ptr(), 16), PolsarStatus::InvalidArgument);

        let mut labels = ptr::null_mut();
        assert_eq!(polsar_labels_generate(comps, &mut labels), PolsarStatus::Ok);
        let bad_cfg = CString::new("nonsense = 1").unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(
            polsar_model_train(raster, labels, bad_cfg.as_ptr(), &mut model, ptr::null_mut()),
            PolsarStatus::Config
        );
        let huge = CString::new("d = 8\npatch = 2\niters = 5\nlr = 1e9\n").unwrap();
        assert_eq!(
            polsar_model_train(raster, labels, huge.as_ptr(), &mut model, ptr::null_mut()),
            PolsarStatus::Diverged
        );

        // Truncated copies stay NUL-terminated and report the full length.
        let mut tiny = [1 as c_char; 4];
        let full = polsar_last_error_message(tiny.as_mut_ptr(), tiny.len());
        assert!(full > 3);
        assert_eq!(tiny[3], 0);

        polsar_labels_free(labels);
        polsar_components_free(comps);
        polsar_raster_free(raster);
        polsar_raster_free(ptr::null_mut());
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(polsar_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
