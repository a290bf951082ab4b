# Evaluation: recall, spectrum, benchmarks
