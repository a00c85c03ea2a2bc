"""Green's functions of periodic problems with reflection and piecewise constant arguments.

The package evaluates the kernels in closed form, assembles the general-T kernel through the
cell matrix, classifies (m, M) parameter pairs by the sign of the kernel and runs the monotone
iteration between lower and upper solutions.
"""
