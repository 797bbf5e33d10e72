//! Every cargo example runs to completion. Each example's own assertions
//! (oracle matches, byte-identical resume, pool recurrences) run with it.

macro_rules! example {
    ($name:ident, $file:literal) => {
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));

            #[test]
            fn runs() {
                main();
            }
        }
    };
}

example!(criterion_walkthrough, "criterion_walkthrough.rs");
example!(weighted_sampling, "weighted_sampling.rs");
example!(review_mechanism, "review_mechanism.rs");
example!(acceleration, "acceleration.rs");
example!(noise_filtering, "noise_filtering.rs");
example!(gradient_check, "gradient_check.rs");
example!(checkpoint_resume, "checkpoint_resume.rs");
