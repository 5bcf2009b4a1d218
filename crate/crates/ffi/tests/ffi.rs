use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use niirf::dataset::{synthetic::synthetic_set, write_container_file, Direction};
use niirf::field::{
    Checkpoint, Conditioning, FieldConfig, FieldModel, FreqRangeTable, HeadSpec, RangeConfig,
};
use niirf_ffi::*;
use tempfile::TempDir;

const FS: f64 = 44_100.0;

fn model(head: HeadSpec, conditioning: Conditioning) -> FieldModel {
    let cfg = FieldConfig {
        sample_rate: FS,
        dft_size: 64,
        rff_channels: 4,
        hidden_width: 8,
        hidden_layers: 2,
        head,
        conditioning,
        ..FieldConfig::default()
    };
    let ranges = match head {
        HeadSpec::Iir { peaks } => Some(FreqRangeTable::log_spaced(peaks, FS, &RangeConfig::default())),
        _ => None,
    };
    FieldModel::new(cfg, ranges, 3).unwrap()
}

fn save(dir: &TempDir, name: &str, m: FieldModel) -> CString {
    let path = dir.path().join(name);
    Checkpoint::new(m, serde_json::json!({})).save(&path).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(niirf_last_error()) }
        .to_string_lossy()
        .into_owned()
}

const AZ: [f64; 3] = [0.0, 120.0, 300.0];
const EL: [f64; 3] = [0.0, 30.0, -45.0];

fn dirs() -> Vec<Direction> {
    AZ.iter()
        .zip(EL)
        .map(|(&a, e)| Direction::from_degrees(a, e).unwrap())
        .collect()
}

#[test]
fn model_outputs_match_the_library() {
    let dir = TempDir::new().unwrap();
    let mut m = model(HeadSpec::Iir { peaks: 3 }, Conditioning::Lora { rank: 1 });
    let mut a = m.fresh_adapter(5);
    for v in a.params_mut().values_mut() {
        *v += 0.01;
    }
    m.insert_adapter("S1", a).unwrap();
    m.round_to_f32();
    let path = save(&dir, "m.ckpt", m.clone());
    let subject = CString::new("S1").unwrap();

    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(niirf_model_load(path.as_ptr(), &mut h), NiirfStatus::Ok);
        assert_eq!(niirf_model_sample_rate(h), FS);
        assert_eq!(niirf_model_bins(h), 33);
        assert_eq!(niirf_model_sections(h), 5);

        let mut db = vec![0.0; 3 * 66];
        let st = niirf_model_predict_db(
            h,
            subject.as_ptr(),
            AZ.as_ptr(),
            EL.as_ptr(),
            3,
            db.as_mut_ptr(),
            db.len(),
        );
        assert_eq!(st, NiirfStatus::Ok, "{}", last_error());
        let expected = m.predict_db(&dirs(), m.adapter("S1")).unwrap();
        assert_eq!(db, expected.iter().copied().collect::<Vec<_>>());

        let mut filters = vec![0.0; 3 * 2 * 5 * 8];
        let st = niirf_model_filters(
            h,
            subject.as_ptr(),
            AZ.as_ptr(),
            EL.as_ptr(),
            3,
            filters.as_mut_ptr(),
            filters.len(),
        );
        assert_eq!(st, NiirfStatus::Ok, "{}", last_error());
        let cascades = m.cascades(&dirs(), m.adapter("S1")).unwrap();
        let first = &cascades[0][0];
        assert_eq!(filters[0], first.low_shelf.fc);
        assert_eq!(filters[1], 0.0);
        assert_eq!(filters[2], first.low_shelf.gain_db);
        let s = first.sections(FS).unwrap();
        assert_eq!(&filters[3..8], &[s[0].b0, s[0].b1, s[0].b2, s[0].a1, s[0].a2]);
        let right_last = &cascades[2][1].high_shelf;
        let tail = &filters[filters.len() - 8..];
        assert_eq!((tail[0], tail[2]), (right_last.fc, right_last.gain_db));

        // no subject means the shared model without adapter
        let st = niirf_model_predict_db(
            h,
            ptr::null(),
            AZ.as_ptr(),
            EL.as_ptr(),
            3,
            db.as_mut_ptr(),
            db.len(),
        );
        assert_eq!(st, NiirfStatus::Ok);
        let shared = m.predict_db(&dirs(), None).unwrap();
        assert_eq!(db, shared.iter().copied().collect::<Vec<_>>());

        niirf_model_free(h);
    }
}

#[test]
fn error_codes_and_messages() {
    let dir = TempDir::new().unwrap();
    let path = save(
        &dir,
        "m.ckpt",
        model(HeadSpec::Iir { peaks: 2 }, Conditioning::None),
    );
    let mag = save(&dir, "mag.ckpt", model(HeadSpec::Magnitude, Conditioning::None));
    unsafe {
        let mut h = ptr::null_mut();
        let missing = CString::new(dir.path().join("nope").to_str().unwrap()).unwrap();
        assert_eq!(niirf_model_load(missing.as_ptr(), &mut h), NiirfStatus::Io);
        assert!(h.is_null());
        assert!(last_error().contains("nope"));
        assert_eq!(niirf_model_load(ptr::null(), &mut h), NiirfStatus::NullPointer);
        assert_eq!(
            niirf_model_load(path.as_ptr(), ptr::null_mut()),
            NiirfStatus::NullPointer
        );

        let garbage = dir.path().join("garbage");
        std::fs::write(&garbage, b"not a checkpoint").unwrap();
        let garbage = CString::new(garbage.to_str().unwrap()).unwrap();
        assert_eq!(niirf_model_load(garbage.as_ptr(), &mut h), NiirfStatus::Format);

        assert_eq!(niirf_model_load(path.as_ptr(), &mut h), NiirfStatus::Ok);
        assert_eq!(last_error(), "");
        let mut out = vec![0.0; 10];
        let st = niirf_model_predict_db(
            h,
            ptr::null(),
            AZ.as_ptr(),
            EL.as_ptr(),
            3,
            out.as_mut_ptr(),
            out.len(),
        );
        assert_eq!(st, NiirfStatus::BufferTooSmall);
        let bad_el = [95.0, 0.0, 0.0];
        let mut big = vec![0.0; 3 * 66];
        let st = niirf_model_predict_db(
            h,
            ptr::null(),
            AZ.as_ptr(),
            bad_el.as_ptr(),
            3,
            big.as_mut_ptr(),
            big.len(),
        );
        assert_eq!(st, NiirfStatus::Domain);
        let who = CString::new("S7").unwrap();
        let st = niirf_model_predict_db(
            h,
            who.as_ptr(),
            AZ.as_ptr(),
            EL.as_ptr(),
            3,
            big.as_mut_ptr(),
            big.len(),
        );
        assert_eq!(st, NiirfStatus::InvalidArgument);
        assert!(last_error().contains("S7"));
        let st = niirf_model_predict_db(
            ptr::null(),
            ptr::null(),
            AZ.as_ptr(),
            EL.as_ptr(),
            3,
            big.as_mut_ptr(),
            big.len(),
        );
        assert_eq!(st, NiirfStatus::NullPointer);
        niirf_model_free(h);

        assert_eq!(niirf_model_load(mag.as_ptr(), &mut h), NiirfStatus::Ok);
        assert_eq!(niirf_model_sections(h), 0);
        let st = niirf_model_filters(
            h,
            ptr::null(),
            AZ.as_ptr(),
            EL.as_ptr(),
            3,
            big.as_mut_ptr(),
            big.len(),
        );
        assert_eq!(st, NiirfStatus::Unsupported);
        niirf_model_free(h);
        niirf_model_free(ptr::null_mut());
        assert_eq!(niirf_model_bins(ptr::null()), 0);
    }
}

#[test]
fn container_access() {
    let dir = TempDir::new().unwrap();
    let sets = [
        synthetic_set("P2", 12, FS, 16, 0.0),
        synthetic_set("P1", 12, FS, 16, 1.0),
    ];
    let path = dir.path().join("c.bin");
    write_container_file(&path, &sets).unwrap();
    let path = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(niirf_container_load(path.as_ptr(), &mut c), NiirfStatus::Ok);
        assert_eq!(niirf_container_subjects(c), 2);
        assert_eq!(
            CStr::from_ptr(niirf_container_subject_id(c, 0)).to_str().unwrap(),
            "P1"
        );
        assert!(niirf_container_subject_id(c, 2).is_null());
        let (mut n, mut len, mut fs) = (0usize, 0usize, 0.0);
        assert_eq!(
            niirf_container_subject_info(c, 1, &mut n, &mut len, &mut fs),
            NiirfStatus::Ok
        );
        assert_eq!((n, len, fs), (12, 16, FS));
        assert_eq!(
            niirf_container_subject_info(c, 5, &mut n, &mut len, &mut fs),
            NiirfStatus::InvalidArgument
        );

        let mut d = vec![0.0; 24];
        assert_eq!(
            niirf_container_directions(c, 1, d.as_mut_ptr(), d.len()),
            NiirfStatus::Ok
        );
        let m0 = &sets[0].measurements()[0];
        assert!((d[0] - m0.direction.azimuth().to_degrees()).abs() < 1e-12);
        assert!((d[1] - m0.direction.elevation().to_degrees()).abs() < 1e-12);

        let mut ir = vec![0.0; 2 * 12 * 16];
        assert_eq!(
            niirf_container_impulse_responses(c, 1, ir.as_mut_ptr(), ir.len()),
            NiirfStatus::Ok
        );
        assert_eq!(ir[0], f64::from(m0.left[0]));
        assert_eq!(ir[16], f64::from(m0.right[0]));
        assert_eq!(
            niirf_container_impulse_responses(c, 1, ir.as_mut_ptr(), 10),
            NiirfStatus::BufferTooSmall
        );
        niirf_container_free(c);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(niirf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("niirf.h").exists());
    let dir = TempDir::new().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"niirf.h\"\nint probe(void) {\n  NiirfModel *m = 0;\n  NiirfStatus s = niirf_model_load(\"x\", &m);\n  \
         size_t bins = niirf_model_bins(m);\n  niirf_model_free(m);\n  return (int)s + (int)bins + (s == NIIRF_STATUS_OK);\n}\n",
    )
    .unwrap();
    for (compiler, extra) in [("cc", &["-std=c99"][..]), ("c++", &["-x", "c++"][..])] {
        let Ok(out) = Command::new(compiler)
            .args(extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(&include)
            .arg(&src)
            .output()
        else {
            eprintln!("{compiler} not available, skipping");
            continue;
        };
        assert!(
            out.status.success(),
            "{compiler}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
