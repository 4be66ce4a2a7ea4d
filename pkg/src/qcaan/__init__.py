"""qcaan: benchmark harness for quantum-circuit-driven minority oversampling.

A simulated quantum circuit Born machine serves as the trainable noise
source of an adversarial generator; its synthetic minority samples are
benchmarked against random oversampling and SMOTE on imbalanced
classification tasks, with rank-test / Bayesian-bootstrap statistics and
surrogate-model explainability over the results.
"""

__version__ = "0.1.0"
