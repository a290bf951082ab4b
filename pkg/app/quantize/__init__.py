# Binary quantization
