# Approximate distance and error bounds
