"""VoxelOpt deformable registration."""
