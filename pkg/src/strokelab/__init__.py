"""strokelab: a dependency-light laboratory for stroke-risk prediction.

Pipeline: CSV -> validated records -> encoded/imputed/standardized splits
-> class-weighted logistic regression and two from-scratch neural networks
-> metrics with bootstrap intervals -> reports, figures, and a cascade.
"""

__version__ = "0.1.0"
