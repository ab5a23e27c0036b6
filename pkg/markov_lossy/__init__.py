"""Fixed-slope lossy compression of discrete Markov sources"""
