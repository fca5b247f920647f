"""Face completion under mesh-like structured occlusions.

Library + CLI for synthesizing meshface corpora, training the three-domain
disentangle/fuse adversarial model on unpaired data, recovering clean
faces, and evaluating PSNR/SSIM and verification TPR@FPR.
"""

__version__ = "0.1.0"
