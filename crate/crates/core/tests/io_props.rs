use proptest::prelude::*;
use sapm_core::io::{encode_pgm, read_matrix_market, read_pgm, write_matrix_market, BitDepth};
use sapm_core::{GrayImage, LightTransport, Provenance};

proptest! {
    #[test]
    fn matrix_market_roundtrip_is_exact(
        ow in 1usize..6, oh in 1usize..6, iw in 1usize..6, ih in 1usize..6,
        entries in prop::collection::vec((0usize..36, 0usize..36, 1e-12..1e6f64), 0..40),
        id in any::<u32>(),
    ) {
        let t: Vec<_> = entries.into_iter().map(|(r, c, v)| (r % (ow * oh), c % (iw * ih), v)).collect();
        let l = LightTransport::from_triplets((ow, oh), (iw, ih), t, Provenance::Projector(id)).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &l).unwrap();
        prop_assert_eq!(read_matrix_market(buf.as_slice()).unwrap(), l);
    }

    #[test]
    fn sixteen_bit_pgm_roundtrip(w in 1usize..20, h in 1usize..20, levels in prop::collection::vec(0u16..=65535, 400)) {
        let img = GrayImage::from_fn(w, h, |x, y| levels[(y * w + x) % 400] as f64 / 65535.0);
        let back = read_pgm(&encode_pgm(&img, BitDepth::Sixteen)).unwrap();
        prop_assert_eq!(back, img);
    }
}
