"""gnslab: a numerical lab for sharp Gagliardo-Nirenberg-Sobolev inequalities on the line."""
