#![no_main]

use ccopt_core::queue::Dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = Dataset::read_csv(data) {
        let s = d.suff_stats();
        assert!(s.n >= 1 && s.sum_interarrival > 0.0 && s.sum_service > 0.0);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), d);
    }
});
