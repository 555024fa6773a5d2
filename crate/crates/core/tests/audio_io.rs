use kwskit::audio::{load_wav, load_wav_with, pad_center, save_wav, AudioClip, LoadOptions, SAMPLE_RATE};
use kwskit::Error;
use proptest::prelude::*;

fn write_raw(path: &std::path::Path, rate: u32, channels: u16, data: &[i16]) {
    let spec = hound::WavSpec {
        channels,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in data {
        w.write_sample(s).unwrap();
    }
    w.finalize().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pcm16_round_trip_is_exact(data in prop::collection::vec(any::<i16>(), 1..4000)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw(&p, SAMPLE_RATE, 1, &data);
        let clip = load_wav(&p).unwrap();
        for (s, &d) in clip.samples().iter().zip(&data) {
            prop_assert_eq!(*s, f32::from(d) / 32768.0);
        }
        let q = dir.path().join("b.wav");
        save_wav(&clip, &q).unwrap();
        prop_assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
    }

    #[test]
    fn pad_center_keeps_content(len in 1usize..500, extra in 0usize..300) {
        let clip = AudioClip::new((0..len).map(|i| (i % 7) as f32 / 10.0).collect(), SAMPLE_RATE).unwrap();
        let out = pad_center(&clip, len + extra).unwrap();
        let left = extra / 2;
        prop_assert_eq!(&out.samples()[left..left + len], clip.samples());
        prop_assert!(out.samples()[..left].iter().chain(&out.samples()[left + len..]).all(|&v| v == 0.0));
    }
}

#[test]
fn stereo_is_averaged() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.wav");
    write_raw(&p, SAMPLE_RATE, 2, &[1000, 3000, -200, 200]);
    let clip = load_wav(&p).unwrap();
    assert_eq!(clip.samples(), &[2000.0 / 32768.0, 0.0]);
}

#[test]
fn other_rates_need_resample_flag() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.wav");
    write_raw(&p, 8000, 1, &[100; 800]);
    assert!(matches!(load_wav(&p), Err(Error::SampleRate { found: 8000, .. })));
    let clip = load_wav_with(&p, LoadOptions { resample: true }).unwrap();
    assert_eq!((clip.sample_rate(), clip.len()), (SAMPLE_RATE, 1600));
}

#[test]
fn float_wavs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.wav");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(&p, spec).unwrap();
    w.write_sample(0.5f32).unwrap();
    w.finalize().unwrap();
    assert!(matches!(load_wav(&p), Err(Error::UnsupportedEncoding { .. })));
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_wav("/nonexistent/x.wav"), Err(Error::Io { .. })));
}
