"""Generates face120.pgm, a synthetic 120x120 grayscale face-like test image.

Shapes are drawn with soft edges, blurred to camera-like sharpness and given
slight sensor grain. Run from this directory: python3 make_face.py
"""
import numpy as np
from scipy.ndimage import gaussian_filter

H = W = 120
rng = np.random.default_rng(20240611)
r, c = np.mgrid[0:H, 0:W].astype(float) + 0.5


def ellipse(cr, cc, ar, ac, angle=0.0):
    """Signed distance-like field: < 1 inside the ellipse."""
    t = np.deg2rad(angle)
    dr, dc = r - cr, c - cc
    u = dr * np.cos(t) + dc * np.sin(t)
    v = -dr * np.sin(t) + dc * np.cos(t)
    return (u / ar) ** 2 + (v / ac) ** 2


def soft(field, width=0.08):
    return 1.0 / (1.0 + np.exp(np.minimum((field - 1.0) / width, 50.0)))


img = 0.42 + 0.18 * (c / W) - 0.08 * (r / H)          # lit backdrop

shoulders = soft(ellipse(128, 60, 26, 62), 0.05)
img = img * (1 - shoulders) + 0.28 * shoulders
neck = soft(ellipse(98, 60, 22, 15), 0.06)
img = img * (1 - neck) + 0.58 * neck

hair = soft(ellipse(46, 60, 42, 37), 0.05)
img = img * (1 - hair) + 0.16 * hair

face = soft(ellipse(60, 60, 38, 29), 0.05)
shade = 0.74 - 0.10 * ((c - 66) / 29) ** 2 - 0.05 * ((r - 60) / 38) ** 2
img = img * (1 - face) + shade * face

fringe = soft(ellipse(27, 58, 12, 30, 8), 0.06)
img = img * (1 - fringe) + 0.18 * fringe

for cc, tilt in ((47, 6), (73, -6)):
    brow = soft(ellipse(45, cc, 2.6, 9.5, tilt), 0.15)
    img = img * (1 - 0.8 * brow) + 0.25 * 0.8 * brow
    sclera = soft(ellipse(53, cc, 3.8, 7.5), 0.12)
    img = img * (1 - sclera) + 0.82 * sclera
    iris = soft(ellipse(53, cc + 0.5, 3.4, 3.4), 0.12)
    img = img * (1 - iris) + 0.20 * iris
    socket = np.exp(-(((r - 55) / 7.0) ** 2 + ((c - cc) / 11.0) ** 2))
    img -= 0.05 * socket * face

bridge = np.exp(-(((c - 61) / 3.0) ** 2)) * soft(ellipse(64, 61, 12, 4), 0.2)
img += 0.05 * bridge
nostrils = sum(soft(ellipse(74, cc, 1.6, 2.6), 0.2) for cc in (56, 66))
img -= 0.22 * nostrils
nose_shadow = np.exp(-(((r - 70) / 8.0) ** 2 + ((c - 66) / 3.0) ** 2))
img -= 0.06 * nose_shadow

lips = soft(ellipse(85, 60, 4.0, 11.0), 0.1)
img = img * (1 - lips) + 0.45 * lips
mouth = soft(ellipse(85, 60, 0.9, 10.0), 0.3)
img = img * (1 - mouth) + 0.22 * mouth

img = gaussian_filter(img, 0.8)
img += rng.normal(0.0, 0.008, img.shape)
img = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)

with open("face120.pgm", "wb") as f:
    f.write(b"P5\n120 120\n255\n")
    f.write(img.tobytes())
