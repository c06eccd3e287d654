use super::{BinaryOp, Expr, UnaryOp};

impl Expr {
    /// Symbolic partial derivative with respect to variable `var`, simplified.
    ///
    /// Variables the expression never references differentiate to `0`.
    pub fn diff(&self, var: usize) -> Expr {
        self.diff_raw(var).simplify()
    }

    fn diff_raw(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Unary(op, a) => {
                let da = a.diff_raw(var);
                if da.is_const(0.0) {
                    return Expr::Const(0.0);
                }
                let a = (**a).clone();
                match op {
                    UnaryOp::Neg => -da,
                    UnaryOp::Exp => da * a.exp(),
                    UnaryOp::Log => da / a,
                    UnaryOp::Sin => da * a.cos(),
                    UnaryOp::Cos => -(da * a.sin()),
                    UnaryOp::Sqrt => da / (Expr::Const(2.0) * a.sqrt()),
                }
            }
            Expr::Binary(op, a, b) => {
                let da = a.diff_raw(var);
                let db = b.diff_raw(var);
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinaryOp::Add => da + db,
                    BinaryOp::Sub => da - db,
                    BinaryOp::Mul => da * b + a * db,
                    // (a/b)' = a'/b - a b' / b^2
                    BinaryOp::Div => da / b.clone() - a * db / b.powf(2.0),
                }
            }
            Expr::Pow(a, e) => {
                let da = a.diff_raw(var);
                if da.is_const(0.0) || *e == 0.0 {
                    return Expr::Const(0.0);
                }
                Expr::Const(*e) * (**a).clone().powf(e - 1.0) * da
            }
        }
    }
}
