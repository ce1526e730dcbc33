# kamsynth: output-feedback controller design via knowledge abstraction and minimization
