"""Multispectral-to-nighttime image translation with a conditional GAN.

Subpackages:

* ``ntlgen.engine``  - numpy reverse-mode autodiff, conv primitives, Adam
* ``ntlgen.model``   - U-Net generator, PatchGAN discriminator, losses, training
* ``ntlgen.geo``     - grid partitioning, preprocessing, tile bundle format
* ``ntlgen.metrics`` - D_eu, D_ma and R_ncc image-pair metrics
* ``ntlgen.synthetic`` - procedural paired scenes for desk-scale experiments
"""

__version__ = "0.1.0"
