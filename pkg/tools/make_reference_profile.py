"""Regenerate src/uavsi/data/reference_profile.csv.

The profile is synthetic: per-layer costs follow the shape of an SSD300
detector on a VGG16 backbone (activations shrink at every pooling stage,
UAV compute grows roughly linearly with depth) and are not measurements.
Server cost is 12% of the UAV cost for every layer.
"""

from uavsi.split import DnnProfile, LayerCost, save_profile

# (uav_ms, out_activation_bits) per layer
LAYERS = [
 (3.5, 6_400_000),(7.0, 6_400_000),(1.0, 1_600_000),          # conv1_1 conv1_2 pool1
 (4.0, 3_200_000),(6.5, 3_200_000),(0.7, 800_000),            # conv2 x2, pool2
 (5.0, 1_600_000),(6.0, 1_600_000),(6.0, 1_600_000),(0.5, 160_000),  # conv3 x3, pool3
 (8.0, 640_000),(9.0, 640_000),(9.0, 640_000),(0.4, 640_000),(0.3, 160_000),  # conv4 x3, l2norm, pool4
 (4.5, 160_000),(4.5, 160_000),(4.5, 160_000),(0.2, 160_000), # conv5 x3, pool5
 (9.0, 320_000),(3.0, 320_000),                               # fc6 fc7
 (1.2, 80_000),(1.5, 48_000),(0.6, 24_000),(0.8, 12_800),      # conv8_1 8_2 9_1 9_2
 (0.4, 9_600),(0.5, 4_600),(0.3, 4_600),(0.4, 2_048),          # conv10, conv11
 (1.1, 180_000),(1.3, 180_000),(0.9, 150_000),(1.0, 150_000),  # loc/conf heads
 (0.6, 120_000),(0.7, 120_000),(0.4, 100_000),(0.5, 100_000),
 (0.8, 100_000),(1.2, 70_000),(2.5, 24_000),                   # concat, softmax, detection out
]
layers = [LayerCost(u, round(u * 0.12, 4), bits) for u, bits in LAYERS]

if __name__ == "__main__":
    profile = DnnProfile("synthetic-ssd300-vgg16", layers, 300 * 300 * 3 * 8, 8)
    save_profile(profile, "src/uavsi/data/reference_profile.csv")
