#![no_main]

use ccopt_core::mcmc::McmcChain;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(chain) = McmcChain::read_csv(data) {
        assert!(!chain.samples.is_empty());
        assert!(chain.samples.iter().all(|(l, m)| *l > 0.0 && *m > 0.0));
        let mut buf = Vec::new();
        chain.write_csv(&mut buf).unwrap();
        assert_eq!(McmcChain::read_csv(buf.as_slice()).unwrap().samples, chain.samples);
    }
});
