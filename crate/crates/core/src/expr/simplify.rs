use super::{pow_checked, BinaryOp, Expr, UnaryOp};

impl Expr {
    /// Best-effort algebraic cleanup.
    ///
    /// Applies constant folding and the identities `0*e = 0`, `1*e = e`,
    /// `e+0 = e`, `e-0 = e`, `e/1 = e`, `e^1 = e`, `e^0 = 1` and `--e = e`.
    /// The result agrees with the input wherever both are defined; it is not
    /// a canonical form.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(op, a) => simplify_unary(*op, a.simplify()),
            Expr::Binary(op, a, b) => simplify_binary(*op, a.simplify(), b.simplify()),
            Expr::Pow(a, e) => simplify_pow(a.simplify(), *e),
        }
    }
}

fn finite(v: Result<f64, super::EvalError>) -> Option<f64> {
    v.ok().filter(|x| x.is_finite())
}

fn simplify_unary(op: UnaryOp, a: Expr) -> Expr {
    if let Some(c) = a.as_const() {
        if let Some(v) = finite(op.apply(c)) {
            return Expr::Const(v);
        }
    }
    match (op, a) {
        (UnaryOp::Neg, Expr::Unary(UnaryOp::Neg, inner)) => *inner,
        (op, a) => Expr::unary(op, a),
    }
}

fn simplify_binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        if let Some(v) = finite(op.apply(x, y)) {
            return Expr::Const(v);
        }
    }
    match op {
        BinaryOp::Add => {
            if a.is_const(0.0) {
                b
            } else if b.is_const(0.0) {
                a
            } else if let Expr::Unary(UnaryOp::Neg, nb) = b {
                simplify_binary(BinaryOp::Sub, a, *nb)
            } else {
                a + b
            }
        }
        BinaryOp::Sub => {
            if b.is_const(0.0) {
                a
            } else if a.is_const(0.0) {
                simplify_unary(UnaryOp::Neg, b)
            } else if let Expr::Unary(UnaryOp::Neg, nb) = b {
                simplify_binary(BinaryOp::Add, a, *nb)
            } else {
                a - b
            }
        }
        BinaryOp::Mul => {
            if a.is_const(0.0) || b.is_const(0.0) {
                Expr::Const(0.0)
            } else if a.is_const(1.0) {
                b
            } else if b.is_const(1.0) {
                a
            } else if a.is_const(-1.0) {
                simplify_unary(UnaryOp::Neg, b)
            } else if b.is_const(-1.0) {
                simplify_unary(UnaryOp::Neg, a)
            } else {
                merge_constant_factors(a, b)
            }
        }
        BinaryOp::Div => {
            if a.is_const(0.0) {
                Expr::Const(0.0)
            } else if b.is_const(1.0) {
                a
            } else {
                a / b
            }
        }
    }
}

// c1 * (c2 * e) -> (c1*c2) * e, keeping the constant on the left
fn merge_constant_factors(a: Expr, b: Expr) -> Expr {
    let (c, rest) = match (a, b) {
        (Expr::Const(c), rest) | (rest, Expr::Const(c)) => (c, rest),
        (a, b) => return a * b,
    };
    if let Expr::Binary(BinaryOp::Mul, ref l, ref r) = rest {
        if let Some(c2) = l.as_const() {
            let k = c * c2;
            if k.is_finite() {
                return simplify_binary(BinaryOp::Mul, Expr::Const(k), (**r).clone());
            }
        }
    }
    Expr::Const(c) * rest
}

fn simplify_pow(a: Expr, e: f64) -> Expr {
    if e == 0.0 {
        return Expr::Const(1.0);
    }
    if e == 1.0 {
        return a;
    }
    if let Some(c) = a.as_const() {
        if let Some(v) = finite(pow_checked(c, e)) {
            return Expr::Const(v);
        }
    }
    if let Expr::Pow(inner, e2) = &a {
        // (u^p)^q = u^(pq) only when p is an integer and q is an integer, so
        // that no sign information is lost
        if e.fract() == 0.0 && e2.fract() == 0.0 {
            return simplify_pow((**inner).clone(), e * e2);
        }
    }
    a.powf(e)
}

#[cfg(test)]
mod tests {
    use crate::expr::Expr;

    #[test]
    fn additive_identity() {
        assert_eq!((Expr::Const(0.0) + Expr::Var(0)).simplify(), Expr::Var(0));
    }

    #[test]
    fn absorbing_zero() {
        assert_eq!(
            (Expr::Const(0.0) * Expr::Var(1).sin()).simplify(),
            Expr::Const(0.0)
        );
    }

    #[test]
    fn constant_folding() {
        assert_eq!(
            (Expr::Const(2.0) * Expr::Const(3.0)).simplify(),
            Expr::Const(6.0)
        );
        assert_eq!(
            (Expr::Const(2.0) * (Expr::Const(3.0) * Expr::Var(0))).simplify(),
            Expr::Const(6.0) * Expr::Var(0)
        );
    }

    #[test]
    fn undefined_constants_are_not_folded() {
        let e = Expr::Const(1.0) / Expr::Const(0.0);
        assert_eq!(e.simplify(), e);
        let e = Expr::Const(-1.0).log();
        assert_eq!(e.simplify(), e);
    }

    #[test]
    fn power_identities() {
        assert_eq!(Expr::Var(0).powf(1.0).simplify(), Expr::Var(0));
        assert_eq!(Expr::Var(0).powf(0.0).simplify(), Expr::Const(1.0));
        assert_eq!(
            Expr::Var(0).powf(2.0).powf(3.0).simplify(),
            Expr::Var(0).powf(6.0)
        );
        // (x^2)^0.5 must keep |x|, so it is left alone
        let e = Expr::Var(0).powf(2.0).powf(0.5);
        assert_eq!(e.simplify(), e);
    }

    #[test]
    fn double_negation() {
        assert_eq!((-(-Expr::Var(0))).simplify(), Expr::Var(0));
        assert_eq!((Expr::Var(0) - (-Expr::Var(1))).simplify(), Expr::Var(0) + Expr::Var(1));
    }
}
